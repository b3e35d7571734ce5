# pylint: disable=C0116
#
#   Copyright 2026 The dyadic-motion Authors
#
#   Licensed under the Apache License, Version 2.0 (the "License");
#   you may not use this file except in compliance with the License.
#   You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

""" Container storage engine: manifest.json plus one raw file per array """

import hashlib
import json
import logging
import os
import datetime
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Type, TypeVar

import fasteners  # pylint: disable=E0401
import numpy as np
from pydantic import BaseModel, ValidationError

from ..errors import FormatError, StorageError, wrap_exceptions
from ..serialize import serialize

log = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class ContainerEngine:
    """ Directory container, little-endian C-order arrays """

    MANIFEST = "manifest.json"
    LOCK = ".lock"
    DTYPES = {
        "float32": ("<f4", "f32"),
        "uint8": ("|u1", "u8"),
    }

    _held = set()
    _held_lock = threading.Lock()

    def __init__(self, path):
        self.path = Path(path)

    def exists(self) -> bool:
        return (self.path / self.MANIFEST).is_file()

    @staticmethod
    def file_name(owner: str, field: str, dtype: str = "float32") -> str:
        return f"{owner}.{field}.{ContainerEngine.DTYPES[dtype][1]}"

    @contextmanager
    def writer(self):
        """ Exclusive access to the container directory """
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"Cannot create container {self.path}: {exc}") from exc
        key = str(self.path.resolve())
        # posix record locks do not exclude writers within one process
        with self._held_lock:
            if key in self._held:
                raise StorageError(f"Container {self.path} is locked by another writer")
            self._held.add(key)
        try:
            lock = fasteners.InterProcessLock(str(self.path / self.LOCK))
            if not lock.acquire(blocking=False):
                raise StorageError(f"Container {self.path} is locked by another writer")
            try:
                yield self
            finally:
                lock.release()
        finally:
            with self._held_lock:
                self._held.discard(key)

    @wrap_exceptions(StorageError)
    def write_array(self, owner: str, field: str, array, dtype: str = "float32") -> dict:
        numpy_dtype, _ = self.DTYPES[dtype]
        data = np.ascontiguousarray(np.asarray(array), dtype=numpy_dtype)
        name = self.file_name(owner, field, dtype)
        #
        with open(self.path / name, "wb") as file:
            file.write(data.tobytes(order="C"))
        #
        return {"file": name, "shape": list(data.shape), "dtype": dtype}

    @wrap_exceptions(StorageError)
    def _read_bytes(self, name: str) -> bytes:
        with open(self.path / name, "rb") as file:
            return file.read()

    def read_array(self, spec, leading_field: str = "shape") -> np.ndarray:
        """ Read one array and check it against its declared shape """
        spec = spec if isinstance(spec, dict) else spec.dict()
        numpy_dtype, _ = self.DTYPES[spec["dtype"]]
        shape = tuple(spec["shape"])
        if not (self.path / spec["file"]).is_file():
            raise FormatError("arrays", f"missing array file {spec['file']}")
        raw = self._read_bytes(spec["file"])
        #
        itemsize = np.dtype(numpy_dtype).itemsize
        row_bytes = int(np.prod(shape[1:], dtype=np.int64)) * itemsize if shape else itemsize
        if shape and row_bytes > 0:
            if len(raw) % row_bytes:
                raise FormatError(
                    "shape", f"{spec['file']} holds {len(raw)} bytes, not a multiple of {row_bytes}"
                )
            held = len(raw) // row_bytes
            if held != shape[0]:
                raise FormatError(
                    leading_field,
                    f"manifest declares {shape[0]} but {spec['file']} holds {held}",
                )
        elif len(raw) != int(np.prod(shape, dtype=np.int64)) * itemsize:
            raise FormatError("shape", f"{spec['file']} size does not match declared {list(shape)}")
        #
        return np.frombuffer(raw, dtype=numpy_dtype).reshape(shape).astype(numpy_dtype[1:])

    @wrap_exceptions(StorageError)
    def save_manifest(self, manifest: BaseModel) -> None:
        """ Write the manifest last and atomically """
        target = self.path / self.MANIFEST
        temporary = self.path / f".{self.MANIFEST}.tmp"
        payload = serialize(manifest)
        with open(temporary, "w", encoding="utf-8") as file:
            json.dump(payload, file, ensure_ascii=False, sort_keys=True, indent=2)
        os.replace(temporary, target)
        log.debug("Saved manifest %s", target)

    def load_manifest(self, model: Type[ModelT]) -> ModelT:
        target = self.path / self.MANIFEST
        if not target.is_file():
            raise StorageError(f"No manifest at {target}")
        try:
            with open(target, "r", encoding="utf-8") as file:
                data = json.load(file)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError("manifest", f"corrupt manifest {target}: {exc}") from exc
        #
        try:
            return model.parse_obj(data)
        except ValidationError as exc:
            error = exc.errors()[0]
            field = ".".join(str(item) for item in error["loc"]) or "manifest"
            raise FormatError(field, error["msg"]) from exc

    def checksum(self, files: Iterable[str]) -> str:
        """ SHA-256 over the named array files in the given order """
        digest = hashlib.sha256()
        for name in files:
            digest.update(name.encode("utf-8"))
            digest.update(self._read_bytes(name))
        return digest.hexdigest()

    def list_files(self):
        files = []
        #
        with os.scandir(self.path) as it:
            for entry in it:
                if entry.name.startswith("."):
                    continue
                stat = entry.stat()
                #
                files.append({
                    "name": entry.name,
                    "size": stat.st_size,
                    "modified": datetime.datetime.fromtimestamp(stat.st_mtime).isoformat(),
                })
        #
        return sorted(files, key=lambda item: item["name"])

    @wrap_exceptions(StorageError)
    def remove_stale(self, keep: Iterable[str]) -> None:
        """ Remove array files not listed in keep """
        keep = set(keep) | {self.MANIFEST}
        for item in self.list_files():
            if item["name"] not in keep and item["name"].rsplit(".", 1)[-1] in ("f32", "u8"):
                os.remove(self.path / item["name"])
