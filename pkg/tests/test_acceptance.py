"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
the terminal summary prints one PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from comtrap.classical import ClassicalState, action_boundary, fit_growth_rate, integrate_lab, \
    integrate_rotating
from comtrap.fewbody import (FewBodyProblem, GaussianInteraction, HarmonicInteraction,
                             build_hamiltonian, diagonalize, relative_marginal, spectrum,
                             transform_two_body, two_body_grid)
from comtrap.meanfield import GridSpec, NonlinearitySpec, ground_state, verify_family
from comtrap.spectral import (build_charpoly, discriminant, instability_window, omega_pm,
                              solve_charpoly)
from comtrap.trap import (ModulatedTrap, RotationSpec, axis_invariants, invariants, make_trap)

from oracles import jacobi_levels, random_axis, random_rotation

TWO_PI = 2 * np.pi


def detail(record_property, text):
    record_property("detail", text)


@pytest.mark.acceptance(1, "stability window (1, 2) for a=(1,4,9) about z by bisection")
def test_c01_window(record_property):
    t0 = time.perf_counter()
    win = instability_window(make_trap(1, 4, 9), [0, 0, 1], method="bisection")
    secs = time.perf_counter() - t0
    err = max(abs(win.omega_lo - 1.0), abs(win.omega_hi - 2.0))
    detail(record_property, f"window=({win.omega_lo:.9f}, {win.omega_hi:.9f}) err={err:.1e} "
                            f"t={secs:.3f}s")
    assert err <= 1e-6 and secs < 1.0


@pytest.mark.acceptance(2, "omega_z**2 = a_z is a root for rotation about z")
def test_c02_axial_root(record_property):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        a = np.sort(rng.uniform(0.2, 10.0, 3))
        rng.shuffle(a)
        trap = make_trap(*a)
        w = rng.uniform(0.0, 5.0)
        fs = solve_charpoly(build_charpoly(invariants(trap, RotationSpec([0, 0, w]))))
        worst = max(worst, np.min(np.abs(fs.omega_sq - a[2])))
    detail(record_property, f"worst |w^2 - a_z| = {worst:.1e}")
    assert worst <= 1e-10


@pytest.mark.acceptance(3, "closed-form in-plane roots match the cubic")
def test_c03_closed_form(record_property):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        ax, ay, az = rng.uniform(0.2, 10.0, 3)
        w = rng.uniform(0.0, 5.0)
        fs = solve_charpoly(build_charpoly(invariants(make_trap(ax, ay, az),
                                                      RotationSpec([0, 0, w]))))
        pm = omega_pm(ax, ay, w)
        for z in (pm.omega_plus_sq, pm.omega_minus_sq):
            worst = max(worst, np.min(np.abs(fs.omega_sq - z)) / max(1.0, abs(z)))
    secs = time.perf_counter() - t0
    detail(record_property, f"worst relative mismatch {worst:.1e} t={secs:.2f}s")
    assert worst <= 1e-10 and secs < 5.0


@pytest.mark.acceptance(4, "discriminant forms agree and are non-negative")
def test_c04_discriminant(record_property):
    rng = np.random.default_rng(4)
    n_draws = 100_000
    vals = rng.uniform(0.1, 10.0, (n_draws, 3))
    worst_rel, most_negative = 0.0, 0.0
    for i in range(n_draws):
        trap = make_trap(*vals[i], axes=random_rotation(rng))
        d = discriminant(axis_invariants(trap, random_axis(rng)))
        worst_rel = max(worst_rel, abs(d.delta - d.rearranged) / d.scale)
        most_negative = min(most_negative, d.delta, d.rearranged)
    # degenerate traps: the sum-of-squares form vanishes exactly; the direct
    # form cancels terms of size ``scale`` and is only zero to rounding
    worst_degenerate, worst_direct = 0.0, 0.0
    for _ in range(1000):
        ax, az = rng.uniform(0.1, 10.0, 2)
        d = discriminant(axis_invariants(make_trap(ax, ax, az), [0, 0, 1]))
        worst_degenerate = max(worst_degenerate, abs(d.rearranged))
        worst_direct = max(worst_direct, abs(d.delta) / d.scale)
    detail(record_property, f"rel {worst_rel:.1e}, min {most_negative:.1e}, "
                            f"degenerate {worst_degenerate:.1e} (direct form {worst_direct:.1e}"
                            f" of scale)")
    assert worst_rel <= 1e-11 and most_negative >= -1e-9
    assert worst_degenerate <= 1e-12 and worst_direct <= 1e-11


@pytest.mark.acceptance(5, "anisotropic traps always have an instability window")
def test_c05_window_exists(record_property):
    rng = np.random.default_rng(5)
    degenerate = 0
    narrowest = np.inf
    for _ in range(10_000):
        vals = rng.uniform(0.1, 10.0, 3)
        while np.min(np.diff(np.sort(vals))) < 1e-3:
            vals = rng.uniform(0.1, 10.0, 3)
        win = instability_window(make_trap(*vals, axes=random_rotation(rng)), random_axis(rng))
        degenerate += win.degenerate
        narrowest = min(narrowest, win.width)
    detail(record_property, f"degenerate {degenerate}/10000, narrowest width {narrowest:.1e}")
    assert degenerate == 0


@pytest.mark.acceptance(6, "integral and boundary forms of the action agree")
def test_c06_action_identity(record_property):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        vals = rng.uniform(1.0, 4.0, 3)
        trap = make_trap(*vals, axes=random_rotation(rng))
        s0 = ClassicalState(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
        t_end = 5 * TWO_PI / np.sqrt(vals.min())
        traj = integrate_lab(trap, s0, t_end, 2e-3)
        amp = np.max(np.sum(traj.R**2, axis=1))
        worst = max(worst, np.max(np.abs(traj.action - action_boundary(traj))) / amp)
    detail(record_property, f"worst |f - f_boundary| / amp^2 = {worst:.1e}")
    assert worst <= 1e-8


@pytest.mark.acceptance(7, "unstable growth rate equals Im(omega_minus)")
def test_c07_growth_rate(record_property):
    trap = make_trap(1, 4, 9)
    w = 1.5
    rate = omega_pm(1, 4, w).omega_minus.imag
    t_start = 5.0
    t_end = t_start + 10.0 / rate
    traj = integrate_rotating(trap, RotationSpec([0, 0, w]), ClassicalState([1e-3, 0, 0], [0, 0, 0]),
                              t_end, 0.005)
    fit = fit_growth_rate(traj, t_min=t_start)
    rel = abs(fit - rate) / rate
    detail(record_property, f"fit {fit:.6f} vs {rate:.6f}, rel {rel:.1e}")
    assert rel <= 0.02


def _family(g, modulation=None, quartic=None, extent=10.0):
    trap = make_trap(1.0, 4.0, 9.0)
    grid = GridSpec(1, extent, 1024)
    nl = NonlinearitySpec(g)
    psi0 = ground_state(grid, trap, nl)
    schedule = trap if modulation is None else ModulatedTrap.sinusoidal(trap, *modulation)
    traj = integrate_lab(schedule, ClassicalState([0.7, 0, 0], [0, 0, 0]), TWO_PI, 1e-3)
    pert = None if quartic is None else (lambda x: quartic * x**4)
    return verify_family(psi0, traj, schedule, nl, [TWO_PI / 4, TWO_PI / 2, TWO_PI], 1e-3,
                         perturbation=pert)


@pytest.mark.acceptance(8, "solution family: evolve and displace commute (1D GP)")
def test_c08_solution_family(record_property):
    lines, ok = [], True
    for label, kwargs in [("g=1", dict(g=1.0)), ("g=0", dict(g=0.0)), ("g=10", dict(g=10.0)),
                          ("g=1 a(t)", dict(g=1.0, modulation=(0.1, 0.3)))]:
        t0 = time.perf_counter()
        report = _family(**kwargs)
        secs = time.perf_counter() - t0
        dist = max(c.l2_distance for c in report.checks)
        com = max(max(c.com_mismatch, c.com_offset) for c in report.checks)
        ok &= dist <= 1e-5 and com <= 1e-5 and secs < 60
        lines.append(f"{label}: L2 {dist:.1e} com {com:.1e} {secs:.0f}s")
    detail(record_property, "; ".join(lines))
    assert ok


@pytest.mark.acceptance(9, "quartic term breaks the family by >= 1e3")
def test_c09_negative_control(record_property):
    base = max(c.l2_distance for c in _family(1.0, extent=8.0).checks)
    broken = max(c.l2_distance for c in _family(1.0, quartic=0.05, extent=8.0).checks)
    detail(record_property, f"L2 {base:.1e} -> {broken:.1e}, ratio {broken / base:.1e}")
    assert broken >= 1e3 * base


@pytest.mark.acceptance(10, "two-body spectrum splits into COM ladders")
def test_c10_spectrum_splitting(record_property):
    p = FewBodyProblem(1.0, HarmonicInteraction(0.5), two_body_grid(256, 3.85))
    E = diagonalize(build_hamiltonian(p), 10).eigenvalues
    err = np.max(np.abs(E - jacobi_levels(1.0, 0.5, 10)))
    spacings = []
    for g, s in [(1.0, 0.5), (2.0, 1.0)]:
        gp = FewBodyProblem(1.0, GaussianInteraction(g, s), two_body_grid(256, 4.5))
        spacings.append(spectrum(gp, 12, ladder_levels=10).ladder_fit.spacing)
    sp_err = max(abs(s - 1.0) for s in spacings)
    detail(record_property, f"harmonic max error {err:.1e}; gaussian spacing error {sp_err:.1e}")
    assert err <= 1e-3 and sp_err <= 1e-3


@pytest.mark.acceptance(11, "relative-coordinate marginal unchanged by the transform")
def test_c11_internal_invariance(record_property):
    p = FewBodyProblem(1.0, GaussianInteraction(1.0, 1.0), two_body_grid(128, 8.0))
    spec = diagonalize(build_hamiltonian(p), 3)
    worst = 0.0
    for i in range(3):
        psi = spec.state(i)
        moved = transform_two_body(psi, ClassicalState([0.7, 0, 0], [0.3, 0, 0]), 0.4)
        worst = max(worst, np.max(np.abs(relative_marginal(moved)[1]
                                          - relative_marginal(psi)[1])))
    detail(record_property, f"max marginal change {worst:.1e}")
    assert worst <= 1e-10


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
