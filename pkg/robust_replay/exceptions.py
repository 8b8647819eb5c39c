# Copyright 2026 The robust-replay Authors

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
This module contains the exception hierarchy used across robust-replay.
"""


class ReplayError(Exception):
    """Base class for all robust-replay errors."""


class ConfigError(ReplayError, ValueError):
    """Raised when an experiment or component configuration is invalid.

    The command line maps this error to exit code 2.
    """


class InputError(ReplayError, ValueError):
    """Raised when an operation receives malformed input, e.g. a feature vector
    of the wrong dimension or a malformed dataset row."""


class RunError(ReplayError, RuntimeError):
    """Raised when a run fails numerically.

    Args:
        message (str): description of the failure
        example_id (int or None): id of the example that produced the failure, if known
    """

    def __init__(self, message, example_id=None):
        if example_id is not None:
            message = f"{message} (example id {example_id})"
        super().__init__(message)
        self.example_id = example_id
