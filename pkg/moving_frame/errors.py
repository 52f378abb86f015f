# Copyright (c) 2026, moving_frame developers
# All rights reserved.
#
# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are met:
#
# * Redistributions of source code must retain the above copyright notice, this
#   list of conditions and the following disclaimer.
#
# * Redistributions in binary form must reproduce the above copyright notice,
#   this list of conditions and the following disclaimer in the documentation
#   and/or other materials provided with the distribution.
#
# * Neither the name of the copyright holder nor the names of its
#   contributors may be used to endorse or promote products derived from
#   this software without specific prior written permission.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS "AS IS"
# AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE
# IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE ARE
# DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE
# FOR ANY DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL
# DAMAGES (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR
# SERVICES; LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY,
# OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

"""Exception hierarchy shared by all moving_frame modules."""


class MovingFrameError(Exception):
    "Base class for all moving_frame errors."
    pass


class DomainError(MovingFrameError, ValueError):
    "An argument lies outside the domain of the operation (e.g. negative time)."
    pass


class ShapeError(MovingFrameError, ValueError):
    "Array dimensions do not match the declared space."
    pass


class AlignmentError(MovingFrameError, ValueError):
    "A time is not a node of the grid it is supposed to be on."
    pass


class InvariantError(MovingFrameError, ValueError):
    "Input data violates a structural invariant (e.g. duplicate jump times)."
    pass


class RegularityError(MovingFrameError, ValueError):
    "Declared regularity flags do not admit the requested solver regime."
    pass


class CapacityError(MovingFrameError):
    """The padded dilation space cannot hold the requested translation.

    ``minimal_padding`` is the smallest padding that would suffice, or None
    when the failure does not depend on the padding."""

    def __init__(self, message, minimal_padding=None):
        super().__init__(message)
        self.minimal_padding = minimal_padding


class ResourceError(MovingFrameError):
    "A configured computational budget (e.g. quadrature nodes) is exceeded."
    pass


class NumericalBlowupError(MovingFrameError):
    "A solver produced a non-finite state or one beyond the blowup threshold."

    def __init__(self, message, time=None, norm=None):
        super().__init__(message)
        self.time = time
        self.norm = norm


class NonExplosionViolatedError(NumericalBlowupError):
    """Truncation level escalation exceeded ``k_max``. Under linear growth this
    should not happen, so it is reported instead of silently truncating."""

    def __init__(self, message, level=None, time=None, norm=None):
        super().__init__(message, time=time, norm=norm)
        self.level = level


class ConfigValidationError(MovingFrameError, ValueError):
    """Experiment configuration is invalid. ``errors`` is a list of
    (field, message) tuples, one per problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = ["%s: %s" % (field, msg) for field, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class VerificationError(MovingFrameError):
    "At least one verification check failed."
    pass
