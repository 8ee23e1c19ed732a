"""Characteristic frequencies of the center of mass in a rotating
anisotropic trap, their stability classification and the band of rotation
speeds where the motion is unbounded.

The rotating-frame equation of motion

    R'' = -A R - Omega x (2 R' + Omega x R)

has normal modes ``exp(i w t)`` whose squared frequencies solve a cubic in
``w**2`` with coefficients built from six invariants of ``A`` and ``Omega``.
"""

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize

from .errors import ValidationError
from .trap import Invariants, RotationSpec, TrapSpec, axis_invariants, invariants

ROOT_TOL = 1e-9

_EPS = np.finfo(float).eps


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


@dataclass(frozen=True)
class CharPoly:
    """Monic cubic ``x**3 + c4 x**2 + c2 x + c0`` in ``x = w**2``."""

    c4: float
    c2: float
    c0: float
    invariants: Optional[Invariants] = None

    @property
    def coefficients(self):
        return np.array([1.0, self.c4, self.c2, self.c0])

    def __call__(self, x):
        return ((x + self.c4) * x + self.c2) * x + self.c0

    def derivative(self, x):
        return (3.0 * x + 2.0 * self.c4) * x + self.c2

    def companion(self):
        return np.array([[-self.c4, -self.c2, -self.c0],
                         [1.0, 0.0, 0.0],
                         [0.0, 1.0, 0.0]])

    def rounding_bound(self, x):
        """Bound on the floating-point error of evaluating the cubic at ``x``."""
        ax = abs(x)
        return 8.0 * _EPS * (((ax + abs(self.c4)) * ax + abs(self.c2)) * ax + abs(self.c0))


def build_charpoly(inv: Invariants) -> CharPoly:
    w2 = inv.omega2
    # Omega.A.Omega and Omega.A^2.Omega through the unit axis
    wAw = w2 * inv.nAn
    wA2w = w2 * inv.nA2n
    c4 = -(2.0 * w2 + inv.trA)
    c2 = w2 * w2 + 3.0 * wAw - inv.trA * w2 + 0.5 * inv.trA**2 - 0.5 * inv.trA2
    c0 = -w2 * wAw + inv.trA * wAw - wA2w - inv.detA
    return CharPoly(c4, c2, c0, inv)


@dataclass(frozen=True)
class FrequencySet:
    """Roots of the characteristic cubic and their stability verdict.

    ``omega_sq`` is sorted by real part. ``margin`` is the smallest real
    root when every root is real, otherwise minus the largest imaginary
    part; ``critical_index`` points at the root that decides the verdict.
    """

    omega_sq: np.ndarray
    classification: Stability
    critical_index: int
    margin: float

    @property
    def omega(self):
        return np.sqrt(self.omega_sq.astype(complex))

    @property
    def growth_rate(self):
        """Largest exponential rate among the modes (0 when bounded)."""
        return float(np.max(np.abs(self.omega.imag)))

    @property
    def is_stable(self):
        return self.classification is Stability.STABLE


def _is_real(z, tol):
    return abs(z.imag) <= tol * max(1.0, abs(z))


def classify(omega_sq, tol=ROOT_TOL):
    """Return ``(Stability, critical_index, margin)`` for three roots."""
    omega_sq = np.asarray(omega_sq, dtype=complex)
    scores = np.array([z.real if _is_real(z, tol) else -abs(z.imag) for z in omega_sq])
    unstable = [i for i, z in enumerate(omega_sq)
                if not _is_real(z, tol) or z.real < -tol]
    k = int(np.argmin(scores))
    if unstable:
        verdict = Stability.UNSTABLE
    elif scores[k] <= tol:
        verdict = Stability.MARGINAL
    else:
        verdict = Stability.STABLE
    return verdict, k, float(scores[k])


def _newton_polish(p: CharPoly, roots, iterations=3):
    out = []
    for x in roots:
        fx = p(x)
        for _ in range(iterations):
            d = p.derivative(x)
            if d == 0:
                break
            y = x - fx / d
            fy = p(y)
            if abs(fy) >= abs(fx):
                break
            x, fx = y, fy
        out.append(x)
    return np.array(out, dtype=complex)


def _merge_multiple_roots(p: CharPoly, roots):
    # Multiple roots come back from any eigensolver split by ~eps**(1/m);
    # snap them when the cubic is within rounding of having that multiplicity.
    x3 = -p.c4 / 3.0
    scale = max(1.0, x3 * x3)
    if (abs(p.c2 - 3.0 * x3 * x3) <= 64 * _EPS * scale
            and abs(p.c0 + x3**3) <= 64 * _EPS * max(1.0, abs(x3) ** 3)):
        return np.array([x3, x3, x3], dtype=complex)

    disc = p.c4**2 - 3.0 * p.c2
    if disc < 0:
        return roots
    sq = np.sqrt(disc)
    crit = [(-p.c4 - sq) / 3.0, (-p.c4 + sq) / 3.0]
    for i in range(3):
        for j in range(i + 1, 3):
            mid = 0.5 * (roots[i] + roots[j])
            if abs(roots[i] - roots[j]) > 1e-4 * max(1.0, abs(mid)):
                continue
            xc = min(crit, key=lambda c: abs(c - mid))
            if abs(p(xc)) <= 4.0 * p.rounding_bound(xc):
                third = -p.c4 - 2.0 * xc
                return np.array([xc, xc, third], dtype=complex)
    return roots


def solve_charpoly(p: CharPoly, tol=ROOT_TOL) -> FrequencySet:
    """Roots in ``w**2`` via the companion-matrix eigenvalues.

    The eigenvalues are Newton-polished on the cubic and numerically
    multiple roots are snapped to their exact real location.
    """
    roots = np.linalg.eigvals(p.companion()).astype(complex)
    roots = _newton_polish(p, roots)
    roots = _merge_multiple_roots(p, roots)
    # conjugate pairs of a real cubic: clean tiny imaginary parts on real roots
    roots = np.array([complex(z.real, 0.0) if abs(z.imag) <= 4 * _EPS * max(1.0, abs(z)) else z
                      for z in roots])
    roots = roots[np.lexsort((roots.imag, roots.real))]
    verdict, k, margin = classify(roots, tol)
    return FrequencySet(roots, verdict, k, margin)


def frequencies(trap: TrapSpec, rot: RotationSpec) -> FrequencySet:
    return solve_charpoly(build_charpoly(invariants(trap, rot)))


class PerpendicularModes(NamedTuple):
    omega_plus_sq: float
    omega_minus_sq: float

    @property
    def omega_plus(self):
        return np.sqrt(complex(self.omega_plus_sq))

    @property
    def omega_minus(self):
        return np.sqrt(complex(self.omega_minus_sq))

    @property
    def unstable(self):
        return min(self.omega_plus_sq, self.omega_minus_sq) < -ROOT_TOL


def omega_pm(a_x, a_y, Omega) -> PerpendicularModes:
    """Closed-form in-plane frequencies for rotation about a principal axis.

    ``w+-**2 = (2 Omega**2 + a+ +- sqrt(a-**2 + 8 Omega**2 a+)) / 2`` with
    ``a+- = a_x +- a_y``. The minus branch is evaluated through the product
    ``w+**2 w-**2 = (Omega**2 - a_x)(Omega**2 - a_y)`` to avoid cancellation.
    """
    if not (a_x > 0 and a_y > 0):
        raise ValidationError("a_x and a_y must be positive")
    w2 = Omega * Omega
    a_plus = a_x + a_y
    a_minus = a_x - a_y
    root = np.sqrt(a_minus * a_minus + 8.0 * w2 * a_plus)
    plus = 0.5 * (2.0 * w2 + a_plus + root)
    minus = (w2 - a_x) * (w2 - a_y) / plus
    return PerpendicularModes(float(plus), float(minus))


class Discriminant(NamedTuple):
    delta: float
    rearranged: float
    scale: float


def discriminant(inv: Invariants) -> Discriminant:
    """Discriminant of the biquadratic free term, computed two ways.

    ``delta`` is ``(TrA nAn - nA2n)**2 - 4 DetA nAn``; ``rearranged`` is the
    sum-of-squares form in the principal frame with ``a_x <= a_y <= a_z``,
    which is manifestly non-negative. ``scale`` is the size of the largest
    term, the natural yardstick for comparing the two.
    """
    if not inv.axis_defined or inv.axis_principal is None:
        raise ValidationError("discriminant needs a rotation axis")
    b = inv.trA * inv.nAn - inv.nA2n
    delta = b * b - 4.0 * inv.detA * inv.nAn
    ax, ay, az = inv.principal_values
    nx2, ny2, nz2 = np.asarray(inv.axis_principal) ** 2
    first = nx2 * ax * (az - ay) + ny2 * ay * (az - ax) + nz2 * az * (ax - ay)
    second = 4.0 * ny2 * nz2 * ay * az * (az - ax) * (ay - ax)
    rearranged = first * first + second
    scale = max(b * b, 4.0 * inv.detA * inv.nAn, first * first, abs(second))
    return Discriminant(float(delta), float(rearranged), float(scale))


@dataclass(frozen=True)
class StabilityWindow:
    """Rotation speeds ``omega_lo < |Omega| < omega_hi`` with unbounded COM motion.

    A degenerate window has ``omega_lo == omega_hi`` and contains no
    unstable speed.
    """

    omega_lo: float
    omega_hi: float
    degenerate: bool

    @property
    def empty(self):
        return self.degenerate

    @property
    def width(self):
        return self.omega_hi - self.omega_lo

    def contains(self, omega):
        return (not self.degenerate) and self.omega_lo < abs(omega) < self.omega_hi

    def as_dict(self):
        return {"lo": self.omega_lo, "hi": self.omega_hi, "degenerate": self.degenerate}


DEGENERATE_RTOL = 1e-12


def _free_term(trap, axis):
    def c0(omega):
        inv = invariants(trap, RotationSpec.about(axis, 1.0), omega2=omega * omega)
        return build_charpoly(inv).c0
    return c0


def instability_window(trap: TrapSpec, axis, method="biquadratic") -> StabilityWindow:
    """Band of unstable rotation speeds about ``axis``.

    ``method="biquadratic"`` solves ``nAn s**2 - (TrA nAn - nA2n) s + DetA = 0``
    for ``s = Omega**2``. ``method="bisection"`` instead brackets the sign
    changes of the free term ``c0(Omega)`` of the characteristic cubic and
    bisects them; it never uses the biquadratic closed form.
    """
    inv = axis_invariants(trap, axis)
    assert inv.nAn > 0, "n.A.n must be positive for a positive trap"
    if method == "biquadratic":
        return _window_biquadratic(inv)
    if method == "bisection":
        return _window_bisection(trap, axis)
    raise ValidationError(f"unknown window method {method!r}")


def _window_biquadratic(inv):
    b = inv.trA * inv.nAn - inv.nA2n
    delta = discriminant(inv).rearranged
    if delta <= DEGENERATE_RTOL * b * b:
        w = float(np.sqrt(b / (2.0 * inv.nAn)))
        return StabilityWindow(w, w, True)
    s_hi = (b + np.sqrt(delta)) / (2.0 * inv.nAn)
    s_lo = inv.detA / (inv.nAn * s_hi)
    return StabilityWindow(float(np.sqrt(s_lo)), float(np.sqrt(s_hi)), False)


def _window_bisection(trap, axis, xtol=1e-14):
    c0 = _free_term(trap, axis)
    # every root of the free term lies below sqrt(TrA)
    top = float(np.sqrt(np.sum(trap.principal_values)))
    peak = optimize.minimize_scalar(lambda w: -c0(w), bounds=(0.0, top),
                                    method="bounded", options={"xatol": 1e-13})
    w_peak = float(peak.x)
    if c0(w_peak) <= 0.0:
        return StabilityWindow(w_peak, w_peak, True)
    lo = optimize.bisect(c0, 0.0, w_peak, xtol=xtol, maxiter=500)
    hi = optimize.bisect(c0, w_peak, top, xtol=xtol, maxiter=500)
    return StabilityWindow(float(lo), float(hi), False)


def stability_sweep(trap: TrapSpec, axis, omegas, threads=None):
    """Frequency sets for each rotation speed in ``omegas`` about ``axis``.

    Results are returned in the order of ``omegas`` no matter how many worker
    threads evaluate them.
    """
    axis = np.asarray(axis, dtype=float)
    omegas = [float(w) for w in omegas]

    def one(w):
        return frequencies(trap, RotationSpec.about(axis, w))

    if threads is None or threads <= 1:
        return [one(w) for w in omegas]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, omegas))
