# Copyright ©2022-2023. The Regents of the University of California
# (Regents). All Rights Reserved.

# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions
# are met: 

# 1. Redistributions of source code must retain the above copyright
# notice, this list of conditions and the following disclaimer. 

# 2. Redistributions in binary form must reproduce the above copyright
# notice, this list of conditions and the following disclaimer in the 
# documentation and/or other materials provided with the
# distribution. 

# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR
# A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT
# HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL,
# SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT
# LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES; LOSS OF USE,
# DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER CAUSED AND ON ANY
# THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY, OR TORT
# (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

from typing import Any, Optional, Sequence


class MapEvaluationError(ValueError):
    """Raised when a lift returns a non-finite value at a sampled point."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message if point is None else f'{message} at point {tuple(point)}')
        self.point = None if point is None else tuple(float(v) for v in point)


class OrbitEscapeError(ValueError):
    """An orbit left the numeric range; the partial segment is attached."""

    def __init__(self, message: str, segment: Any = None):
        super().__init__(message)
        self.segment = segment


class PreconditionError(ValueError):
    """Numerical refusal: a precondition of the requested construction does not hold."""


class WindowOverflowError(ValueError):
    """A region reached the x-boundary of its cover window; widen the window."""


class BranchError(ValueError):
    pass


class ConfigSchemaError(ValueError):

    def __init__(self, field_path: str, message: str = 'missing required field'):
        super().__init__(f'{field_path}: {message}')
        self.field_path = field_path
