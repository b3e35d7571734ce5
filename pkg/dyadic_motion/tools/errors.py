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

""" Error types and wrappers """

import functools
import traceback
from typing import Optional, Sequence


class DyadicMotionError(Exception):
    """ Base error, carries the process exit code """
    exit_code = 1


class ParameterError(DyadicMotionError, ValueError):
    exit_code = 2


class ShapeError(ParameterError):
    """ Tensor/array shape does not match the contract """

    def __init__(self, what: str, expected: Sequence, actual: Sequence):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{what}: expected shape {self.expected}, got {self.actual}")


class FormatError(DyadicMotionError):
    """ Container or manifest is invalid """
    exit_code = 3

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class StorageError(DyadicMotionError, OSError):
    exit_code = 3


class NumericalAbort(DyadicMotionError, ArithmeticError):
    """ Non-finite loss during training """
    exit_code = 4

    def __init__(self, step: int, components: dict, stage: Optional[str] = None):
        self.step = step
        self.components = dict(components)
        self.stage = stage
        prefix = f"{stage}: " if stage else ""
        super().__init__(f"{prefix}non-finite loss at step {step}: {self.components}")


def check_shape(what: str, value, expected: Sequence) -> None:
    """ Raise ShapeError unless value.shape matches expected (None matches any) """
    actual = tuple(value.shape)
    if len(actual) != len(expected) or any(
            e is not None and e != a for e, a in zip(expected, actual)
    ):
        raise ShapeError(what, ["*" if e is None else e for e in expected], actual)


def wrap_exceptions(target_exception):
    """ Wrap foreign exceptions into target_exception, package errors pass through """
    #
    def _decorator(func):
        _target_exception = target_exception
        #
        @functools.wraps(func)
        def _decorated(*_args, **_kvargs):
            try:
                return func(*_args, **_kvargs)
            except DyadicMotionError:
                raise
            except BaseException as exception_data:  # pylint: disable=W0703
                if isinstance(exception_data, (KeyboardInterrupt, SystemExit)):
                    raise
                raise _target_exception(
                    f"{func.__name__} failed: {exception_data}\n{traceback.format_exc()}"
                ) from exception_data
        #
        return _decorated
    #
    return _decorator
