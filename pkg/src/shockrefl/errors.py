"""Typed error taxonomy shared by all modules.

Every failure mode that a caller may want to branch on gets its own
exception class.  The CLI maps these onto its exit-code contract.
"""


class ShockReflError(Exception):
    """Base class for all package errors."""


class ValidationError(ShockReflError, ValueError):
    """Bad input data (parameter ranges, malformed grids, ...)."""


class NoCompression(ValidationError):
    """Incident shock has zero or negative strength (rho1 <= rho0)."""


class NonpositiveDensity(ValidationError):
    """A density that must be positive is not."""


class VacuumReached(ShockReflError):
    """The Bernoulli density closure was evaluated past vacuum."""


class BracketingFailure(ShockReflError):
    """A 1-D root find could not bracket a sign change."""


class DetachedWedgeAngle(ShockReflError):
    """Wedge angle below the detachment angle: no reflection states exist."""


class RootSeparationFailure(ShockReflError):
    """The weak/strong roots could not be separated numerically."""


class ZeroVector(ShockReflError):
    """A direction vector degenerated to zero length."""


class DegenerateSonicArc(ShockReflError):
    """Sonic arc endpoints coincide where a genuine arc was required."""


class AttachedShockDetected(ShockReflError):
    """Reflected shock foot reached the wedge vertex (P2 -> P3)."""


class FoldedMesh(ShockReflError):
    """The structured mesh Jacobian changed sign."""


class EllipticityLost(ShockReflError):
    """Ellipticity cutoff active outside the allowed sonic band."""


class NoConvergence(ShockReflError):
    """An iteration hit its limit without meeting tolerance."""


class GraphPropertyLost(ShockReflError):
    """Updated shock violates the monotone-graph / tangent-slope bounds."""


class EmptyOverlap(ShockReflError):
    """Two solution domains share no grid points."""


class TooFewSamples(ValidationError):
    """Not enough samples on a curve for the requested check."""


class ArchiveError(ShockReflError):
    """Solution archive is missing, unreadable, or inconsistent."""
