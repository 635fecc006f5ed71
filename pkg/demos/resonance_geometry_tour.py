"""Tour of the collision-region and resonance-manifold machinery.

Run:  python3 demos/resonance_geometry_tour.py       (about 20 seconds)
"""

import numpy as np

from wavekin.dispersion import DispersionRelation, eval_omega
from wavekin.reference import cap_coverage_mc, mollified_delta_mc, sphere_manifold_oracle
from wavekin.resonance_geometry import (
    cap_coverage_expectation,
    digamma_root,
    expanded_radius,
    iterate_collision_region,
    least_covering_caps,
    manifold_quadrature,
    PointSet3,
    ResonanceManifold,
    vcone,
)

rng = np.random.default_rng(11)

print("=== Growing the collision region from a seed ball ===")
d = DispersionRelation.power_law(2.0)
seed = PointSet3(generator=(np.array([1.0, 0.0, 0.0]), 0.3))
for k, region in enumerate(iterate_collision_region(seed, d, steps=4, rng_seed=11)):
    print(f"after stage {k + 1}: {region.n_points} points, "
          f"max radius {region.max_radius:.4f}")
print("(each stage keeps resonant partners of pairs drawn from the current")
print(" region, so the maximal radius ratchets outward stage by stage)")

print()
print("=== Spherical cap coverage ===")
for q, N in ((0.1, 10), (0.1, 44), (0.2, 100)):
    expect = cap_coverage_expectation(q, N)
    mc, se = cap_coverage_mc(q, N, seed=3)
    print(f"q={q}, N={N:3d}: expected coverage {expect:.6f}, "
          f"measured {mc:.6f} (se {se:.1e})")
n = least_covering_caps(0.1)
print(f"fewest caps of area fraction 0.1 leaving a miss chance under 0.1*0.1: {n}")

print()
print("=== Cone volume and expanded radius ===")
for R, rho in ((1.0, 0.3), (2.0, 0.5)):
    print(f"vcone(R={R}, rho={rho}) = {vcone(R, rho):.6f}")
for r in (0.001, 0.01, 0.1):
    v, exceeds = expanded_radius(r, 1.0)
    print(f"expanded radius at (r={r}, R=1): {v:.6f}, exceeds R: {exceeds}")

print()
print("=== Spreading root: omega((1+s)R/2) + omega((s-1)R/2) = 2 omega(R) ===")
for alpha in (1.2, 1.5, 1.8, 2.0):
    d = DispersionRelation.power_law(alpha)
    s0 = digamma_root(d, 1.0)
    resid = (eval_omega(d, (1 + s0) / 2) + eval_omega(d, (s0 - 1) / 2)
             - 2 * eval_omega(d, 1.0))
    note = "  (= sqrt(3) exactly)" if alpha == 2.0 else ""
    print(f"alpha={alpha}: s0 = {s0:.12f}, residual {resid:+.1e}{note}")

print()
print("=== Resonance manifold quadrature ===")
k2 = np.array([0.9, 0.1, -0.2])
k3 = np.array([-0.3, 0.8, 0.5])
d2 = DispersionRelation.power_law(2.0)
m = ResonanceManifold(k2, k3, d2)
coeffs = [1.0, 0.5, 1.0, 0.0, 0.0]          # integrand 1 + u/2 + u^2
quad = manifold_quadrature(m, lambda u: 1.0 + 0.5 * u + u**2)
oracle = sphere_manifold_oracle(k2, k3, coeffs)
print(f"quadratic dispersion: quadrature {quad:.10f}, sphere oracle {oracle:.10f}")

d15 = DispersionRelation.power_law(1.5)
m = ResonanceManifold(k2, k3, d15)
quad = manifold_quadrature(m, lambda u: 1.0 + 0.5 * u + u**2)
mc, se = mollified_delta_mc(d15, k2, k3, lambda rx: 1.0 + 0.5 * rx + rx**2,
                            n_samples=2_000_000, seed=3, n_batches=8)
print(f"alpha=1.5:           quadrature {quad:.6f}, "
      f"mollified-delta MC {mc:.6f} (se {se:.1e})")
