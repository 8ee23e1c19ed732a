"""Centre-of-mass dynamics of trapped quantum gases.

Modules
-------
trap
    Trap matrix, rigid rotation and the rotational invariants.
spectral
    Characteristic cubic of the rotating oscillator, stability, instability window.
classical
    Lab and rotating-frame trajectories, classical action, displacement phase.
meanfield
    Split-step Gross-Pitaevskii evolution and the displacement solution family.
fewbody
    Two-body grid spectrum, ladder decomposition and two-body displacement.
"""

from .errors import (BoundaryLeakError, ComtrapError, ConvergenceError, FrameError,
                     InstabilityAbort, NumericalError, ValidationError)
from .trap import (Invariants, ModulatedTrap, RotatingTrap, RotationSpec, TrapSpec,
                   axis_invariants, euler_zyz, invariants, make_trap)
from .spectral import (CharPoly, FrequencySet, Stability, StabilityWindow, build_charpoly,
                       discriminant, frequencies, instability_window, omega_pm, solve_charpoly,
                       stability_sweep)
from .classical import (ClassicalState, Frame, Trajectory, action, action_boundary,
                        fit_growth_rate, integrate_lab, integrate_rotating, phase_field, rotating_to_lab)
from .meanfield import (GridSpec, GridWavefunction, NonlinearitySpec, com_expectation, displace,
                        evolve, ground_state, verify_family)
from .fewbody import (FewBodyProblem, FewBodySpectrum, GaussianInteraction, HarmonicInteraction,
                      build_hamiltonian, diagonalize, ladder_decompose, relative_marginal,
                      spectrum, transform_two_body, two_body_grid)

__version__ = "0.1.0"
