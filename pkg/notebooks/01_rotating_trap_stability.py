# %% [markdown]
# # Stability of a rotating anisotropic trap
#
# A particle in the trap `V = R.A.R/2` seen from a frame turning at angular
# velocity `Omega` has three normal-mode frequencies. Their squares are the
# roots of a cubic whose coefficients depend only on a few rotation
# invariants. Motion is bounded while all three squares are real and positive.

# %%
import numpy as np

from comtrap import (RotationSpec, axis_invariants, discriminant, euler_zyz, frequencies,
                     instability_window, make_trap, stability_sweep)

trap = make_trap(1.0, 4.0, 9.0)
print("principal values:", trap.principal_values)

# %% [markdown]
# Sweep the rotation speed about z. The classification switches to unstable
# once `Omega` passes `sqrt(a_x) = 1` and switches back after `sqrt(a_y) = 2`.

# %%
omegas = np.linspace(0.0, 3.0, 13)
for w, fs in zip(omegas, stability_sweep(trap, [0, 0, 1], omegas)):
    print(f"Omega={w:4.2f}  {fs.classification.value:9s}  w^2={np.round(fs.omega_sq, 4)}")

# %% [markdown]
# The window itself comes from a quadratic in `Omega**2`, or by bisection on
# the sign of the cubic's free term.

# %%
print(instability_window(trap, [0, 0, 1]))
print(instability_window(trap, [0, 0, 1], method="bisection"))

# %% [markdown]
# A tilted trap and a generic axis still have a window. Its existence follows
# from a discriminant that can be written as a sum of squares.

# %%
tilted = make_trap(1.0, 2.5, 6.0, euler_zyz(20.0, 35.0, 50.0))
axis = np.array([0.3, -0.5, 0.8])
d = discriminant(axis_invariants(tilted, axis))
print(f"direct {d.delta:.6g}  sum-of-squares {d.rearranged:.6g}")
print(instability_window(tilted, axis))

# %% [markdown]
# An axially symmetric trap spun about its symmetry axis has no window at all.

# %%
print(instability_window(make_trap(2.0, 2.0, 5.0), [0, 0, 1]))
print(frequencies(make_trap(2.0, 2.0, 5.0), RotationSpec([0, 0, 1.5])).classification)
