"""Exception hierarchy shared by all ffstlab modules."""

from __future__ import annotations


class FFSTError(Exception):
    """Base class for every error raised by ffstlab."""


class InvalidArgument(FFSTError, ValueError):
    """A parameter is outside its documented domain."""


class NumericFailure(FFSTError, ArithmeticError):
    """An eigensolver or iterative propagator did not deliver the requested accuracy."""


class DegenerateResonance(NumericFailure):
    """Two modes are equally close to the requested resonance energy."""


class DarkMode(NumericFailure):
    """The selected mode does not couple to one of the end qubits."""


class ResonanceCollision(NumericFailure):
    """An off-resonant mode is degenerate with the resonant one."""


class SizeCapExceeded(FFSTError, ValueError):
    """The full Hilbert space is larger than the configured oracle cap."""
