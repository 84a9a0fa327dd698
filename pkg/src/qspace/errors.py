"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: input problems exit 4,
certificate failures exit 2, verification failures exit 3.
"""


class InputError(ValueError):
    """Malformed or inconsistent user input (codes, circuits, flags)."""


class CertificateError(RuntimeError):
    """A chain certificate failed construction or re-validation."""


class SynthesisError(RuntimeError):
    """A synthesis hypothesis was violated; the message names the bullet."""


class VerificationError(RuntimeError):
    """Simulated circuit disagrees with its target instrument."""
