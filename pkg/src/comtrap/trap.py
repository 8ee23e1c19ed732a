"""Trap geometry: the harmonic potential matrix, rigid rotation and the
scalar invariants that feed the characteristic equation.

Natural units throughout (m = hbar = 1); the potential matrix ``A`` holds
squared angular frequencies, so the potential energy is ``0.5 * r @ A @ r``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ValidationError

SYMMETRY_RTOL = 1e-12
RECONSTRUCT_RTOL = 1e-10

_AXIS_NAMES = ("x", "y", "z")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def euler_zyz(alpha, beta, gamma, degrees=True):
    """Rotation matrix for intrinsic z-y-z Euler angles.

    The frame is turned by ``alpha`` about z, then by ``beta`` about the new
    y, then by ``gamma`` about the new z; ``R = Rz(alpha) Ry(beta) Rz(gamma)``.
    """
    return Rotation.from_euler("ZYZ", [alpha, beta, gamma], degrees=degrees).as_matrix()


def rotation_about(axis, angle):
    """Rotation matrix for a right-handed turn by ``angle`` about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        return np.eye(3)
    x, y, z = axis / norm
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    # Rodrigues; called once per integrator stage, so no scipy object here
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def _check_orthonormal(axes):
    axes = np.asarray(axes, dtype=float)
    if axes.shape != (3, 3):
        raise ValidationError(f"axes must be a 3x3 rotation, got shape {axes.shape}")
    if not np.allclose(axes.T @ axes, np.eye(3), atol=1e-10):
        raise ValidationError("axes matrix is not orthonormal")
    return axes


@dataclass(frozen=True)
class TrapSpec:
    """Static anisotropic harmonic trap.

    Attributes
    ----------
    A : ndarray, shape (3, 3)
        Symmetric positive potential matrix (squared frequencies).
    principal_values : ndarray, shape (3,)
        Eigenvalues of ``A`` sorted ascending, ``(a_x, a_y, a_z)``.
    principal_axes : ndarray, shape (3, 3)
        Orthonormal matrix whose columns are the matching eigenvectors.
    """

    A: np.ndarray
    principal_values: np.ndarray
    principal_axes: np.ndarray

    def __post_init__(self):
        for name in ("A", "principal_values", "principal_axes"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        rebuilt = self.principal_axes @ np.diag(self.principal_values) @ self.principal_axes.T
        scale = max(np.max(np.abs(self.A)), 1e-300)
        if np.max(np.abs(rebuilt - self.A)) > RECONSTRUCT_RTOL * scale:
            raise ValidationError("principal decomposition does not reproduce A")

    @classmethod
    def from_matrix(cls, A):
        """Build a trap from a full matrix, symmetrizing round-off asymmetry."""
        A = np.asarray(A, dtype=float)
        if A.shape != (3, 3):
            raise ValidationError(f"trap matrix must be 3x3, got shape {A.shape}")
        scale = np.max(np.abs(A))
        if np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * max(scale, 1e-300):
            raise ValidationError("trap matrix is not symmetric")
        A = 0.5 * (A + A.T)
        vals, vecs = np.linalg.eigh(A)
        for k, v in enumerate(vals):
            if not v > 0.0:
                raise ValidationError(
                    f"trap matrix must be positive definite; eigenvalue {k} is {v!r}"
                )
        return cls(A, vals, vecs)

    @property
    def omega_max(self):
        """Largest trap frequency, ``sqrt(a_z)``."""
        return float(np.sqrt(self.principal_values[-1]))

    def matrix_at(self, t):
        return self.A

    def schedule_omega_max(self, t_end):
        return self.omega_max

    def rotated(self, Q):
        """The same trap turned rigidly by the rotation matrix ``Q``."""
        Q = _check_orthonormal(Q)
        return TrapSpec(Q @ self.A @ Q.T, self.principal_values, Q @ self.principal_axes)

    def restricted(self, dim, t=0.0):
        """Upper-left ``dim x dim`` block, for 1D/2D grids."""
        return restrict_matrix(self.matrix_at(t), dim)


def make_trap(a_x, a_y, a_z, axes=None):
    """Trap with squared frequencies ``a_x, a_y, a_z`` along the columns of ``axes``.

    ``axes`` defaults to the identity. Values need not be given in ascending
    order; they are sorted together with their axes.
    """
    values = np.array([a_x, a_y, a_z], dtype=float)
    for name, v in zip(_AXIS_NAMES, values):
        if not v > 0.0:
            raise ValidationError(f"a_{name} must be > 0, got {v!r}")
    axes = np.eye(3) if axes is None else _check_orthonormal(axes)
    order = np.argsort(values, kind="stable")
    values = values[order]
    axes = axes[:, order]
    A = axes @ np.diag(values) @ axes.T
    return TrapSpec(0.5 * (A + A.T), values, axes)


def restrict_matrix(A, dim):
    """Upper-left block of ``A``; the discarded coordinates must decouple."""
    A = np.asarray(A, dtype=float)
    if dim == 3:
        return A
    off = np.concatenate([A[:dim, dim:].ravel(), A[dim:, :dim].ravel()])
    if off.size and np.max(np.abs(off)) > 1e-12 * max(np.max(np.abs(A)), 1e-300):
        raise ValidationError(
            f"trap couples the first {dim} coordinates to the rest; cannot restrict to {dim}D"
        )
    return A[:dim, :dim]


@dataclass(frozen=True)
class RotationSpec:
    """Constant angular velocity vector of the trap."""

    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        w = _frozen(self.omega)
        if w.shape != (3,) or not np.all(np.isfinite(w)):
            raise ValidationError("omega must be a finite 3-vector")
        object.__setattr__(self, "omega", w)

    @classmethod
    def about(cls, axis, magnitude):
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise ValidationError("rotation axis must be non-zero")
        return cls(axis / norm * magnitude)

    @property
    def magnitude(self):
        return float(np.linalg.norm(self.omega))

    @property
    def is_rotating(self):
        return self.magnitude > 0.0

    @property
    def axis(self) -> Optional[np.ndarray]:
        """Unit axis, or None for the no-rotation case."""
        m = self.magnitude
        if m == 0.0:
            return None
        return self.omega / m

    def frame_rotation(self, t):
        """Rotation carrying rotating-frame coordinates to the lab at time ``t``."""
        if not self.is_rotating:
            return np.eye(3)
        return rotation_about(self.axis, self.magnitude * t)


@dataclass(frozen=True)
class RotatingTrap:
    """Lab-frame view of a trap turning rigidly: ``A(t) = Q(t) A Q(t)^T``."""

    trap: TrapSpec
    rotation: RotationSpec

    def matrix_at(self, t):
        Q = self.rotation.frame_rotation(t)
        return Q @ self.trap.A @ Q.T

    def schedule_omega_max(self, t_end):
        return self.trap.omega_max


@dataclass(frozen=True)
class ModulatedTrap:
    """Trap whose strength is scaled in time: ``A(t) = m(t) A``.

    ``modulation`` must stay positive over the integration span.
    """

    trap: TrapSpec
    modulation: Callable[[float], float]

    @classmethod
    def sinusoidal(cls, trap, depth, frequency):
        return cls(trap, lambda t: 1.0 + depth * np.sin(frequency * t))

    def matrix_at(self, t):
        return self.modulation(t) * self.trap.A

    def schedule_omega_max(self, t_end):
        ts = np.linspace(0.0, max(t_end, 0.0), 1001)
        peak = max(self.modulation(t) for t in ts)
        return float(np.sqrt(peak * self.trap.principal_values[-1]))


@dataclass(frozen=True)
class Invariants:
    """Scalars of the trap/rotation pair entering the characteristic equation.

    ``nAn`` and ``nA2n`` are contractions with the unit rotation axis; when
    there is no rotation they are reported as 0 and ``axis_defined`` is
    False. ``principal_values`` and ``axis_principal`` (the axis expressed in
    the trap's principal frame) are carried along for the rearranged
    discriminant.
    """

    trA: float
    trA2: float
    detA: float
    omega2: float
    nAn: float
    nA2n: float
    axis_defined: bool = True
    principal_values: Optional[np.ndarray] = None
    axis_principal: Optional[np.ndarray] = None

    @property
    def omega(self):
        return float(np.sqrt(self.omega2))


def axis_invariants(trap: TrapSpec, axis):
    """Invariants for a unit axis alone (rotation speed left at zero)."""
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValidationError("axis must be non-zero")
    return invariants(trap, RotationSpec(n / norm), omega2=0.0)


def invariants(trap: TrapSpec, rot: RotationSpec, omega2=None) -> Invariants:
    a = trap.principal_values
    trA = float(np.sum(a))
    trA2 = float(np.sum(a * a))
    detA = float(np.prod(a))
    w2 = rot.magnitude**2 if omega2 is None else float(omega2)
    n = rot.axis
    if n is None:
        return Invariants(trA, trA2, detA, w2, 0.0, 0.0, False, trap.principal_values, None)
    An = trap.A @ n
    nAn = float(n @ An)
    nA2n = float(An @ An)
    return Invariants(trA, trA2, detA, w2, nAn, nA2n, True,
                      trap.principal_values, _frozen(trap.principal_axes.T @ n))


def trap_from_config(section):
    """``{"ax", "ay", "az", "euler_deg"?}`` -> TrapSpec."""
    euler = section.get("euler_deg")
    axes = None if euler is None else euler_zyz(*euler, degrees=True)
    return make_trap(section["ax"], section["ay"], section["az"], axes)


def rotation_from_config(section):
    if section is None:
        return RotationSpec()
    return RotationSpec(np.asarray(section.get("omega", [0.0, 0.0, 0.0]), dtype=float))
