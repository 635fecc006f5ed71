"""Tour of the dispersion laws and the radial collision weights.

Run:  python3 demos/dispersion_and_kernel.py
"""

import numpy as np

from wavekin.collision_kernel import (
    KernelWeights,
    cutoff_kernel,
    four_sine_closed_form,
    min_identity,
    resonant_quadruple,
    sine_integral_oracle,
    xi_weight,
)
from wavekin.dispersion import DispersionRelation, eval_mho, eval_omega, invert_omega

print("=== Dispersion relations ===")
for alpha in (1.2, 1.5, 2.0):
    d = DispersionRelation.power_law(alpha)
    r = 1.7
    w = eval_omega(d, r)
    print(
        f"alpha={alpha}: omega({r}) = {w:.6f}, "
        f"invert back -> {invert_omega(d, w):.6f}, "
        f"mho({r}) = r/omega'(r) = {eval_mho(d, r):.6f}"
    )

print()
print("=== Four-sine integral: oracle vs closed forms ===")
# The eight-term closed form holds for any positive radii; the (pi/4)*min
# short form only where the sorted radii satisfy max+min <= mid+mid.
inside = (1.0, 1.2, 0.9, 1.1)      # satisfies the inequality
outside = (0.7, 2.1, 1.3, 0.9)     # violates it: 2.1+0.7 > 1.3+0.9
for quad in (inside, outside):
    oracle = sine_integral_oracle(*quad)
    closed = four_sine_closed_form(*quad)
    s = np.sort(quad)
    on_domain = s[3] + s[0] <= s[2] + s[1]
    line = (
        f"radii {quad}: oracle {oracle:.6f}, eight-term {closed:.6f}"
        f", (pi/4)min {'applies' if on_domain else 'does not apply'}"
    )
    if on_domain:
        line += f" -> {min_identity(*quad):.6f}"
    print(line)

print()
print("=== Resonant quadruples always satisfy the min identity ===")
rng = np.random.default_rng(7)
d = DispersionRelation.power_law(1.5)
for _ in range(3):
    r, r1, r2, r3 = resonant_quadruple(d, rng)
    defect = eval_omega(d, r) + eval_omega(d, r1)
    defect -= eval_omega(d, r2) + eval_omega(d, r3)
    quad = (r, r1, r2, r3)
    print(
        f"radii ({r:.4f}, {r1:.4f}, {r2:.4f}, {r3:.4f}): "
        f"resonance defect {defect:+.2e}, "
        f"|eight-term - (pi/4)min| = {abs(four_sine_closed_form(*quad) - min_identity(*quad)):.2e}"
    )

print()
print("=== Frequency-side weights ===")
d = DispersionRelation.power_law(1.5)
print(f"xi weight at frequencies (1, 8, 1, 8): {xi_weight(d, 1.0, 8.0, 1.0, 8.0):.10f}")
for n in (2.0, 4.0):
    kw = KernelWeights(cutoff_n=n)
    val = cutoff_kernel(kw, d, 1.0, 1.0, 1.0)
    print(f"cutoff kernel at unit frequencies, radius band [1/{n:g}, {n:g}): {val:.6f}")
val = cutoff_kernel(KernelWeights(cutoff_n=2.0), d, 9.0, 1.0, 1.0)
print(f"cutoff kernel with w=9 whose radius falls outside [0.5, 2): {val}")
