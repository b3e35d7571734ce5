#     Copyright 2026 The dyadic-motion Authors
#
#     Licensed under the Apache License, Version 2.0 (the "License");
#     you may not use this file except in compliance with the License.
#     You may obtain a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#     Unless required by applicable law or agreed to in writing, software
#     distributed under the License is distributed on an "AS IS" BASIS,
#     WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#     See the License for the specific language governing permissions and
#     limitations under the License.

""" Metaclass patterns """

from abc import ABCMeta
from threading import Lock
from typing import Optional


class SingletonMeta(type):
    _instance: Optional[object] = None
    _lock: Lock = Lock()

    def __call__(cls, *args, **kwargs):
        with cls._lock:
            if not cls._instance:
                cls._instance = super().__call__(*args, **kwargs)
        return cls._instance

    def reset(cls) -> None:
        """ Drop the cached instance, next call rebuilds it """
        with cls._lock:
            cls._instance = None


class SingletonABC(SingletonMeta, ABCMeta):
    ...
