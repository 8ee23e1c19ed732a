"""Classical center-of-mass trajectories in lab and rotating frames, the
action accumulated along them and the phase field of the displacement
transform.

Integration is fixed-step classical Runge-Kutta (4th order) on the
first-order system (R, V); the step is bounded by 1/50 of the shortest
trap period unless explicitly forced.
"""

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import FrameError, InstabilityAbort, ValidationError
from .trap import RotatingTrap, RotationSpec, TrapSpec

STEPS_PER_PERIOD = 50
ABORT_FACTOR = 1e6


class Frame(str, enum.Enum):
    LAB = "lab"
    ROTATING = "rot"


@dataclass(frozen=True)
class ClassicalState:
    R: np.ndarray
    V: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("R", "V"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"{name} must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "t", float(self.t))


def _cross(a, b):
    # np.cross is slow on single 3-vectors; this sits in the RK4 inner loop
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _readonly(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled path.

    ``t``, ``R``, ``V`` and ``acc`` are the samples (accelerations are kept
    for Hermite interpolation). ``action`` holds the accumulated classical
    action per sample for lab-frame paths and is None otherwise.
    ``potential`` is the trap schedule the path was integrated in.
    """

    t: np.ndarray
    R: np.ndarray
    V: np.ndarray
    acc: np.ndarray
    frame: Frame
    action: Optional[np.ndarray] = None
    lagrangian: Optional[np.ndarray] = None
    potential: Any = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("t", "R", "V", "acc", "action", "lagrangian"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _readonly(v))
        if np.any(np.diff(self.t) <= 0):
            raise ValidationError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def state(self, i) -> ClassicalState:
        return ClassicalState(self.R[i], self.V[i], self.t[i])

    @property
    def samples(self):
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> ClassicalState:
        return self.state(-1)

    @cached_property
    def _splines(self):
        out = {
            "R": CubicHermiteSpline(self.t, self.R, self.V, axis=0),
            "V": CubicHermiteSpline(self.t, self.V, self.acc, axis=0),
        }
        if self.action is not None:
            out["f"] = CubicHermiteSpline(self.t, self.action, self.lagrangian)
        return out

    def state_at(self, t):
        """Interpolated ``(ClassicalState, action)`` at time ``t``.

        Cubic Hermite interpolation using the stored derivatives; exact at
        sample times. Action is None for rotating-frame paths.
        """
        if not self.t[0] - 1e-12 <= t <= self.t[-1] + 1e-12:
            raise ValidationError(f"t={t} outside trajectory span [{self.t[0]}, {self.t[-1]}]")
        idx = np.flatnonzero(np.abs(self.t - t) <= 1e-12 * max(1.0, abs(t)))
        if idx.size:
            i = int(idx[0])
            f = None if self.action is None else float(self.action[i])
            return self.state(i), f
        s = self._splines
        f = float(s["f"](t)) if "f" in s else None
        return ClassicalState(s["R"](t), s["V"](t), t), f


def _step_count(t_end, dt):
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not t_end > 0:
        raise ValidationError(f"t_end must be positive, got {t_end}")
    n = int(np.ceil(t_end / dt - 1e-9))
    return n, t_end / n


def _check_dt(dt, omega_max, force):
    bound = 2.0 * np.pi / omega_max / STEPS_PER_PERIOD
    if dt > bound * (1 + 1e-12) and not force:
        raise ValidationError(
            f"dt={dt} exceeds the stability bound {bound:.6g} (1/{STEPS_PER_PERIOD} of the "
            f"shortest period); pass force=True to override"
        )


def _rk4_matrix(M, h):
    """One classical RK4 step of ``x' = M x`` as a matrix: sum of (hM)^k / k!, k <= 4."""
    hM = h * M
    P = np.eye(len(M))
    term = np.eye(len(M))
    for k in range(1, 5):
        term = term @ hM / k
        P = P + term
    return P


def _rk4(accel, s0: ClassicalState, t_end, dt, frame, potential, linear=None):
    """Fixed-step RK4. ``linear`` is the constant 6x6 matrix of the system
    when it has one; the step is then applied as its exact matrix form."""
    n, h = _step_count(t_end, dt)
    t = s0.t + h * np.arange(n + 1)
    R = np.empty((n + 1, 3))
    V = np.empty((n + 1, 3))
    acc = np.empty((n + 1, 3))
    R[0], V[0] = s0.R, s0.V
    acc[0] = accel(t[0], R[0], V[0])
    omega_max = potential.schedule_omega_max(t_end)
    scale = max(np.linalg.norm(s0.R), np.linalg.norm(s0.V) / omega_max)
    limit = ABORT_FACTOR * scale if scale > 0 else np.inf
    if linear is not None:
        P = _rk4_matrix(linear, h)
        x = np.empty((n + 1, 6))
        x[0, :3], x[0, 3:] = s0.R, s0.V
        for i in range(n):
            x[i + 1] = P @ x[i]
            if x[i + 1, 0] ** 2 + x[i + 1, 1] ** 2 + x[i + 1, 2] ** 2 > limit * limit:
                R, V = x[:i + 2, :3], x[:i + 2, 3:]
                acc = (x[:i + 2] @ linear.T)[:, 3:]
                partial = Trajectory(t[:i + 2], R, V, acc, frame, potential=potential)
                raise InstabilityAbort(
                    f"|R| exceeded {ABORT_FACTOR:g} x initial scale at t={t[i + 1]:.6g}",
                    partial)
        return Trajectory(t, x[:, :3], x[:, 3:], (x @ linear.T)[:, 3:], frame,
                          potential=potential)
    for i in range(n):
        r, v, ti = R[i], V[i], t[i]
        k1v = acc[i]
        k2r = v + 0.5 * h * k1v
        k2v = accel(ti + 0.5 * h, r + 0.5 * h * v, k2r)
        k3r = v + 0.5 * h * k2v
        k3v = accel(ti + 0.5 * h, r + 0.5 * h * k2r, k3r)
        k4r = v + h * k3v
        k4v = accel(ti + h, r + h * k3r, k4r)
        R[i + 1] = r + h / 6.0 * (v + 2.0 * k2r + 2.0 * k3r + k4r)
        V[i + 1] = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        acc[i + 1] = accel(t[i + 1], R[i + 1], V[i + 1])
        if np.linalg.norm(R[i + 1]) > limit:
            partial = Trajectory(t[:i + 2], R[:i + 2], V[:i + 2], acc[:i + 2], frame,
                                 potential=potential)
            raise InstabilityAbort(
                f"|R| exceeded {ABORT_FACTOR:g} x initial scale at t={t[i + 1]:.6g}", partial)
    return Trajectory(t, R, V, acc, frame, potential=potential)


def integrate_lab(potential, s0: ClassicalState, t_end, dt, force=False) -> Trajectory:
    """Integrate ``R'' = -A(t) R`` in the lab frame and accumulate the action.

    ``potential`` is any trap schedule exposing ``matrix_at(t)``: a static
    :class:`TrapSpec`, a :class:`RotatingTrap` or a :class:`ModulatedTrap`.
    """
    _check_dt(dt, potential.schedule_omega_max(t_end), force)

    def accel(t, r, v):
        return -potential.matrix_at(t) @ r

    linear = None
    if isinstance(potential, TrapSpec):
        linear = np.block([[np.zeros((3, 3)), np.eye(3)], [-potential.A, np.zeros((3, 3))]])
    traj = _rk4(accel, s0, t_end, dt, Frame.LAB, potential, linear)
    lag = lagrangian(traj, potential)
    f = action(traj, potential)
    return Trajectory(traj.t, traj.R, traj.V, traj.acc, Frame.LAB, f, lag, potential)


def integrate_rotating(trap: TrapSpec, rot: RotationSpec, s0: ClassicalState, t_end, dt,
                       force=False) -> Trajectory:
    """Integrate ``R'' = -A R - Omega x (2 R' + Omega x R)`` in the co-rotating frame."""
    w = rot.omega
    # the fastest rotating-frame mode is bounded by sqrt(a_z) + |Omega|
    _check_dt(dt, trap.omega_max + rot.magnitude, force)
    A = trap.A

    def accel(t, r, v):
        return -A @ r - _cross(w, 2.0 * v + _cross(w, r))

    W = _cross_matrix(w)
    linear = np.block([[np.zeros((3, 3)), np.eye(3)], [-A - W @ W, -2.0 * W]])
    return _rk4(accel, s0, t_end, dt, Frame.ROTATING, _RotatingFrameBound(trap, rot), linear)


def _cross_matrix(w):
    """Matrix of ``v -> w x v``."""
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


@dataclass(frozen=True)
class _RotatingFrameBound:
    trap: TrapSpec
    rotation: RotationSpec

    def schedule_omega_max(self, t_end):
        return self.trap.omega_max + self.rotation.magnitude


def rotating_to_lab(traj: Trajectory, trap: TrapSpec, rot: RotationSpec) -> Trajectory:
    """Map a rotating-frame path into the lab, where the trap turns rigidly."""
    if traj.frame is not Frame.ROTATING:
        raise FrameError("trajectory is not in the rotating frame")
    w = rot.omega
    Q = np.array([rot.frame_rotation(t) for t in traj.t])
    R = np.einsum("nij,nj->ni", Q, traj.R)
    V = np.einsum("nij,nj->ni", Q, traj.V + np.cross(w, traj.R))
    potential = RotatingTrap(trap, rot)
    acc = -np.einsum("nij,nj->ni", [potential.matrix_at(t) for t in traj.t], R)
    lab = Trajectory(traj.t, R, V, acc, Frame.LAB, potential=potential)
    return Trajectory(traj.t, R, V, acc, Frame.LAB, action(lab, potential),
                      lagrangian(lab, potential), potential)


def lagrangian(traj: Trajectory, potential=None):
    """``0.5 (V.V - R.A(t).R)`` at every sample."""
    if traj.frame is not Frame.LAB:
        raise FrameError("the action is defined for lab-frame trajectories only")
    potential = traj.potential if potential is None else potential
    A = np.array([potential.matrix_at(t) for t in traj.t])
    return 0.5 * (np.einsum("ni,ni->n", traj.V, traj.V)
                  - np.einsum("ni,nij,nj->n", traj.R, A, traj.R))


def action(traj: Trajectory, potential=None):
    """Accumulated action ``f(t) = 0.5 int_0^t (V.V - R.A.R) dt`` per sample.

    Cumulative Simpson quadrature over the stored samples.
    """
    lag = lagrangian(traj, potential)
    if len(traj) < 3:
        return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(traj.t) * (lag[1:] + lag[:-1]))])
    return cumulative_simpson(lag, x=traj.t, initial=0.0)


def action_boundary(traj: Trajectory):
    """Boundary form of the action, ``0.5 V(t).R(t) - 0.5 V(0).R(0)``.

    Equals :func:`action` only along true solutions of the equation of motion.
    """
    if traj.frame is not Frame.LAB:
        raise FrameError("the action is defined for lab-frame trajectories only")
    vr = np.einsum("ni,ni->n", traj.V, traj.R)
    return 0.5 * (vr - vr[0])


def phase_field(r, state: ClassicalState, f):
    """Displacement phase ``theta(r) = r.V - f`` for points ``r`` of shape (..., d), d <= 3."""
    r = np.asarray(r, dtype=float)
    d = r.shape[-1]
    return r @ state.V[:d] - f


def fit_growth_rate(traj: Trajectory, t_min=None, t_max=None):
    """Least-squares slope of ``log|R|`` against time over ``[t_min, t_max]``."""
    mask = np.ones(len(traj), dtype=bool)
    if t_min is not None:
        mask &= traj.t >= t_min
    if t_max is not None:
        mask &= traj.t <= t_max
    r = np.linalg.norm(traj.R[mask], axis=1)
    slope, _ = np.polyfit(traj.t[mask], np.log(r), 1)
    return float(slope)
