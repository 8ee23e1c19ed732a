"""Two particles in a 1D harmonic trap with a pair interaction.

The grid Hamiltonian over ``(x1, x2)`` is diagonalized to show that the
spectrum splits into centre-of-mass ladders of spacing ``sqrt(a)`` stacked
on the internal levels, and the two-body displacement transform is checked
to leave the relative-coordinate marginal untouched.

Coordinates: ``rho = (x1 + x2)/2`` (centre of mass), ``xi = x1 - x2``.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .classical import ClassicalState
from .errors import ConvergenceError, ValidationError
from .meanfield import (GridSpec, GridWavefunction, _check_leak, _in_subspace, _Strang,
                        spectral_shift)

POINTS_PER_LENGTH = 8
RESIDUAL_TOL = 1e-8
LADDER_TOL = 1e-3


@dataclass(frozen=True)
class HarmonicInteraction:
    """``V(xi) = kappa xi**2 / 2``."""

    kappa: float

    def __call__(self, xi):
        return 0.5 * self.kappa * xi * xi

    def length_scale(self, a):
        w2 = a + 2.0 * self.kappa
        if not w2 > 0:
            raise ValidationError(f"a + 2 kappa must be positive, got {w2}")
        return w2 ** -0.25

    def exact_levels(self, a, count):
        """Lowest ``count`` levels ``sqrt(a)(k + 1/2) + sqrt(a + 2 kappa)(j + 1/2)``."""
        wc, wi = np.sqrt(a), np.sqrt(a + 2.0 * self.kappa)
        n = count + 1
        k, j = np.meshgrid(np.arange(n), np.arange(n))
        return np.sort((wc * (k + 0.5) + wi * (j + 0.5)).ravel())[:count]


@dataclass(frozen=True)
class GaussianInteraction:
    """``V(xi) = g exp(-xi**2 / (2 s**2))``."""

    g: float
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValidationError(f"interaction range s must be positive, got {self.s}")

    def __call__(self, xi):
        return self.g * np.exp(-0.5 * (xi / self.s) ** 2)

    def length_scale(self, a):
        return self.s


Interaction = Union[HarmonicInteraction, GaussianInteraction]


def parse_interaction(text: str) -> Interaction:
    """``"harmonic:kappa"`` or ``"gaussian:g,s"``."""
    kind, _, args = text.partition(":")
    try:
        values = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ValidationError(f"bad interaction parameters in {text!r}") from None
    if kind == "harmonic" and len(values) == 1:
        return HarmonicInteraction(values[0])
    if kind == "gaussian" and len(values) == 2:
        return GaussianInteraction(*values)
    raise ValidationError(f"interaction must be harmonic:kappa or gaussian:g,s, got {text!r}")


def two_body_grid(points, extent):
    """Cell-centred 2D grid over ``(x1, x2)``, symmetric under ``x -> -x``."""
    return GridSpec(2, extent, points, centered=True)


@dataclass(frozen=True)
class FewBodyProblem:
    """Two particles in ``0.5 a (x1**2 + x2**2)`` interacting through ``V(x1 - x2)``."""

    a: float
    interaction: Interaction
    grid: GridSpec
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise ValidationError("only two particles are supported")
        if not self.a > 0:
            raise ValidationError(f"a must be positive, got {self.a}")
        if self.grid.dim != 2:
            raise ValidationError("two-body grid must be 2D over (x1, x2)")
        lengths = {"centre-of-mass oscillator length": self.a ** -0.25,
                   "interaction length": self.interaction.length_scale(self.a)}
        for what, ell in lengths.items():
            if self.grid.dx > ell / POINTS_PER_LENGTH:
                need = 2.0 * self.grid.extent * POINTS_PER_LENGTH / ell
                need = 1 << int(np.ceil(np.log2(need)))
                raise ValidationError(
                    f"grid spacing {self.grid.dx:.4g} does not resolve the {what} {ell:.4g} "
                    f"with {POINTS_PER_LENGTH} points; need N >= {need} at L={self.grid.extent}")

    def potential(self):
        x1, x2 = self.grid.coords()
        return 0.5 * self.a * (x1 * x1 + x2 * x2) + self.interaction(x1 - x2)


@dataclass(frozen=True, eq=False)
class GridHamiltonian:
    """Sparse grid Hamiltonian together with the problem it discretizes."""

    matrix: sps.csr_matrix
    problem: FewBodyProblem

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, v):
        return self.matrix @ v


def build_hamiltonian(p: FewBodyProblem) -> GridHamiltonian:
    """Second-order central differences with zero (Dirichlet) boundary values."""
    n, dx = p.grid.points, p.grid.dx
    ones = np.ones(n)
    D2 = sps.diags([ones[1:], -2.0 * ones, ones[1:]], [-1, 0, 1]) / dx**2
    eye = sps.identity(n)
    T = -0.5 * (sps.kron(D2, eye) + sps.kron(eye, D2))
    H = (T + sps.diags(p.potential().ravel())).tocsr()
    return GridHamiltonian(H, p)


@dataclass(frozen=True)
class LadderFit:
    """Assignment of levels to ``(internal j, rung k)``.

    ``internal`` are the internal energies ``E_I(j)`` so that
    ``E = E_I(j) + sqrt(a)(k + 1/2)`` up to ``residuals``; ``spacing`` is the
    rung spacing fitted freely by least squares (NaN if no ladder has two
    rungs). ``flagged`` marks a max residual above ``tolerance``.
    """

    assignments: list
    internal: np.ndarray
    residuals: np.ndarray
    spacing: float
    tolerance: float

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    @property
    def flagged(self):
        return self.max_residual > self.tolerance

    def as_dict(self):
        return {
            "assignments": [{"j": j, "k": k} for j, k in self.assignments],
            "internal": self.internal.tolist(),
            "residuals": self.residuals.tolist(),
            "max_residual": self.max_residual,
            "spacing": self.spacing,
            "tolerance": self.tolerance,
            "flagged": self.flagged,
        }


@dataclass(frozen=True, eq=False)
class FewBodySpectrum:
    """Lowest eigenpairs; eigenvectors normalized in the grid measure.

    ``parity`` is the exchange parity (+1 symmetric/bosonic, -1
    antisymmetric/fermionic) of each eigenvector.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    parity: np.ndarray
    residuals: np.ndarray
    grid: GridSpec
    ladder_fit: Optional[LadderFit] = field(default=None)

    def __len__(self):
        return len(self.eigenvalues)

    def state(self, i) -> GridWavefunction:
        return GridWavefunction(self.eigenvectors[i], self.grid)

    def sector(self, parity):
        """Indices of the states with the given exchange parity."""
        return np.flatnonzero(self.parity == parity)


def _resolve_parity(vals, vecs, n, cluster_tol):
    """Rotate degenerate clusters onto exchange eigenstates; return parities."""
    vecs = vecs.copy()
    parity = np.empty(len(vals), dtype=int)
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[j - 1] <= cluster_tol * max(1.0, abs(vals[i])):
            j += 1
        block = vecs[:, i:j]
        swapped = block.reshape(n, n, -1).transpose(1, 0, 2).reshape(n * n, -1)
        M = block.T @ swapped
        w, U = np.linalg.eigh(0.5 * (M + M.T))
        vecs[:, i:j] = block @ U
        parity[i:j] = np.where(w > 0, 1, -1)
        i = j
    return vecs, parity


def diagonalize(H: GridHamiltonian, k_lowest, cluster_tol=1e-6) -> FewBodySpectrum:
    """Lowest ``k_lowest`` eigenpairs by shift-invert Lanczos.

    The shift sits at the potential minimum, below the whole spectrum, so
    the eigenvalues nearest the shift are the lowest ones.
    """
    grid = H.problem.grid
    size = H.shape[0]
    if not 0 < k_lowest < size // 10:
        raise ValidationError(f"k_lowest must be in (0, {size // 10}), got {k_lowest}")
    sigma = float(H.problem.potential().min())
    try:
        # fixed start vector: ARPACK's default is random and breaks reproducibility
        v0 = np.random.default_rng(0).standard_normal(size)
        vals, vecs = eigsh(H.matrix, k=k_lowest, sigma=sigma, which="LM", v0=v0)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}", np.nan) from None
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs /= np.linalg.norm(vecs, axis=0)
    vecs, parity = _resolve_parity(vals, vecs, grid.points, cluster_tol)
    res = np.linalg.norm(H.matrix @ vecs - vecs * vals, axis=0)
    if np.max(res) > RESIDUAL_TOL:
        raise ConvergenceError(
            f"eigenpair residual {np.max(res):.3e} exceeds {RESIDUAL_TOL:g}", float(np.max(res)))
    # unit norm in the grid measure: sum |psi|^2 dx1 dx2 = 1
    psi = (vecs / grid.dx).T.reshape((k_lowest,) + grid.shape)
    return FewBodySpectrum(vals, psi, parity, res, grid)


def ladder_decompose(spec: FewBodySpectrum, a, tol=LADDER_TOL, match=0.05) -> LadderFit:
    """Greedy split of the spectrum into centre-of-mass ladders.

    Levels are taken in ascending order. Each is offered to the existing
    ladders of the same exchange parity (a rung shift does not change it) at
    that ladder's next free rung; the best candidate within ``match *
    sqrt(a)`` takes it, otherwise the level opens a new ladder at rung 0.
    """
    E = np.asarray(spec.eigenvalues, dtype=float)
    if len(E) < 10:
        raise ValidationError(f"ladder decomposition needs >= 10 levels, got {len(E)}")
    w = np.sqrt(a)
    ladders = []  # [base energy, parity, next rung]
    assignments = []
    for e, par in zip(E, spec.parity):
        best, best_res = None, match * w
        for j, (base, lpar, nxt) in enumerate(ladders):
            if lpar != par:
                continue
            r = abs(e - base - w * nxt)
            if r < best_res:
                best, best_res = j, r
        if best is None:
            ladders.append([e, par, 1])
            assignments.append((len(ladders) - 1, 0))
        else:
            assignments.append((best, ladders[best][2]))
            ladders[best][2] += 1
    j_idx = np.array([j for j, _ in assignments])
    k_idx = np.array([k for _, k in assignments])
    nj = len(ladders)
    # internal energies with the spacing pinned to sqrt(a)
    shifted = E - w * (k_idx + 0.5)
    internal = np.array([shifted[j_idx == j].mean() for j in range(nj)])
    residuals = shifted - internal[j_idx]
    # free least-squares spacing: E = e_j + s k
    if np.any(k_idx > 0):
        M = np.zeros((len(E), nj + 1))
        M[np.arange(len(E)), j_idx] = 1.0
        M[:, -1] = k_idx
        spacing = float(np.linalg.lstsq(M, E, rcond=None)[0][-1])
    else:
        spacing = float("nan")
    return LadderFit([(int(j), int(k)) for j, k in assignments], internal, residuals,
                     spacing, tol)


def spectrum(p: FewBodyProblem, k_lowest=12, ladder_levels=None) -> FewBodySpectrum:
    """Diagonalize and attach the ladder fit over the lowest ``ladder_levels`` states."""
    spec = diagonalize(build_hamiltonian(p), k_lowest)
    m = len(spec) if ladder_levels is None else ladder_levels
    head = replace(spec, eigenvalues=spec.eigenvalues[:m], parity=spec.parity[:m])
    return replace(spec, ladder_fit=ladder_decompose(head, p.a))


def transform_two_body(Psi: GridWavefunction, state: ClassicalState, f) -> GridWavefunction:
    """``exp(i theta(x1) + i theta(x2)) Psi(x1 - R, x2 - R)`` with ``theta(x) = x V - f``."""
    grid = Psi.grid
    if grid.dim != 2:
        raise ValidationError("two-body wavefunction must live on a 2D (x1, x2) grid")
    _in_subspace(state, 1)
    R, V = state.R[0], state.V[0]
    shifted = spectral_shift(Psi.psi, grid, (R, R))
    _check_leak(shifted, Psi.t, what="two-body displacement")
    x1, x2 = grid.coords()
    theta = (x1 + x2) * V - 2.0 * f
    return GridWavefunction(shifted * np.exp(1j * theta), grid, Psi.t)


def relative_marginal(Psi: GridWavefunction):
    """``(xi, p(xi))``: density of ``xi = x1 - x2`` integrated over the centre of mass.

    Sums along the grid diagonals, so ``sum(p) * dx`` is the norm.
    """
    rho = Psi.density
    n, dx = Psi.grid.points, Psi.grid.dx
    offsets = np.arange(-(n - 1), n)
    # row i = x1, column j = x2; offset j - i = -xi/dx
    p = np.array([np.trace(rho, offset=-m) for m in offsets]) * dx
    return offsets * dx, p


def com_expectation_two_body(Psi: GridWavefunction):
    """``<rho>`` and ``<P>`` (total momentum) of a two-body state."""
    grid = Psi.grid
    x1, x2 = grid.coords()
    rho = Psi.density
    norm = rho.sum()
    pos = float(np.sum(0.5 * (x1 + x2) * rho) / norm)
    phat = np.fft.fftn(Psi.psi)
    k1, k2 = grid.wavenumbers()
    mom = float(np.sum((k1 + k2) * np.abs(phat) ** 2) / np.sum(np.abs(phat) ** 2))
    return pos, mom


def evolve_two_body(Psi: GridWavefunction, p: FewBodyProblem, t_end, dt):
    """Strang split-step evolution of the two-body state on the periodic grid."""
    if Psi.grid != p.grid:
        raise ValidationError("wavefunction grid differs from the problem grid")
    V = p.potential()
    if dt > 0.1 / np.sqrt(p.a) or dt * np.max(np.abs(V)) > 0.5:
        raise ValidationError(f"dt={dt} too large for this trap and grid")
    prop = _Strang(p.grid, lambda t: V, static=True)
    psi, t = prop.run(np.array(Psi.psi), Psi.t, t_end, dt)
    return GridWavefunction(psi, p.grid, Psi.t + t_end)
