"""Independent reference computations for the verification suites.

Everything here deliberately avoids the package's closed forms and quadrature
reductions: sphere areas are counted by Monte-Carlo membership, manifold
integrals are done either with the quadratic-case exact formula or by a
mollified-delta volume integral, and polynomial integrals are evaluated from
antiderivatives.  Agreement between these and the production code is the
evidence the verify commands and the acceptance tests report.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence, Tuple

import numpy as np

from wavekin.dispersion import DispersionRelation, eval_omega, invert_omega

__all__ = [
    "sphere_manifold_oracle",
    "mollified_delta_mc",
    "cap_coverage_mc",
    "vcone_mc",
]


def sphere_manifold_oracle(
    k2: Sequence[float],
    k3: Sequence[float],
    poly_coeffs: Sequence[float],
) -> float:
    """Exact manifold integral for the quadratic dispersion, polynomial integrand.

    For omega = |k|^2 the resonance set of (k2, k3) is the sphere with
    diameter [k2, k3]; |grad G| = 2 |2x - gamma| is the constant 4 rho0 on it
    (rho0 the sphere radius).  Integrating a radial polynomial against the
    surface measure / |grad G| gives

        (pi / (2 D)) * int_{|D - rho0|}^{D + rho0} u * poly(u) du,

    D = |gamma| / 2, evaluated here from antiderivatives, term by term.
    """
    k2 = np.asarray(k2, dtype=float).reshape(3)
    k3 = np.asarray(k3, dtype=float).reshape(3)
    gamma = k2 + k3
    D = 0.5 * float(np.linalg.norm(gamma))
    if D <= 0.0:
        raise ValueError("k2 + k3 = 0 has no manifold")
    rho0 = 0.5 * float(np.linalg.norm(k2 - k3))
    lo, hi = abs(D - rho0), D + rho0
    total = 0.0
    for k, c in enumerate(poly_coeffs):
        total += c * (hi ** (k + 2) - lo ** (k + 2)) / (k + 2)
    return math.pi / (2.0 * D) * total


def mollified_delta_mc(
    d: DispersionRelation,
    k2: Sequence[float],
    k3: Sequence[float],
    integrand: Callable[[np.ndarray], np.ndarray],
    n_samples: int = 8_000_000,
    seed: int = 0,
    eps_fraction: float = 0.03,
    n_batches: int = 1,
) -> Tuple[float, float]:
    """Monte-Carlo manifold integral via a mollified delta of the defect G.

    Samples uniformly in the origin-centered ball that contains the manifold,
    evaluates a Gaussian delta_eps(G(x)) at two widths (eps and eps/2, same
    samples), and Richardson-extrapolates the O(eps^2) mollification bias to
    zero.  Returns (estimate, standard error of the extrapolated value).

    ``n_batches`` splits the samples into independently seeded streams; the
    result is deterministic for a fixed (seed, n_batches) pair and the spread
    across batches provides the error estimate.
    """
    k2 = np.asarray(k2, dtype=float).reshape(3)
    k3 = np.asarray(k3, dtype=float).reshape(3)
    gamma = k2 + k3
    if float(np.linalg.norm(gamma)) <= 0.0:
        raise ValueError("k2 + k3 = 0 has no manifold")
    w_total = eval_omega(d, float(np.linalg.norm(k2))) + eval_omega(
        d, float(np.linalg.norm(k3))
    )
    radius = invert_omega(d, w_total) * 1.02
    volume = 4.0 / 3.0 * math.pi * radius ** 3
    eps1 = eps_fraction * w_total
    eps2 = 0.5 * eps1

    if d.kind == "power_law":
        alpha = d.alpha
        def omega_many(r: np.ndarray) -> np.ndarray:
            return r ** alpha
    else:
        def omega_many(r: np.ndarray) -> np.ndarray:
            return np.vectorize(d.omega_fn, otypes=[float])(r)

    n_batches = max(1, int(n_batches))
    per_batch = int(n_samples) // n_batches
    est1 = np.empty(n_batches)
    est2 = np.empty(n_batches)
    chunk = 2_000_000
    for b in range(n_batches):
        rng = np.random.default_rng([seed, b])
        s1 = 0.0
        s2 = 0.0
        left = per_batch
        while left > 0:
            take = min(chunk, left)
            left -= take
            u = rng.normal(size=(take, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            rad = radius * rng.uniform(size=(take, 1)) ** (1.0 / 3.0)
            x = rad * u
            rx = rad[:, 0]
            ry = np.linalg.norm(gamma - x, axis=1)
            g = omega_many(ry) + omega_many(rx) - w_total
            phi = integrand(rx)
            for eps, acc in ((eps1, 1), (eps2, 2)):
                dens = np.exp(-0.5 * (g / eps) ** 2) / (eps * math.sqrt(2.0 * math.pi))
                val = float(np.sum(phi * dens))
                if acc == 1:
                    s1 += val
                else:
                    s2 += val
        est1[b] = volume * s1 / per_batch
        est2[b] = volume * s2 / per_batch

    extrap = (4.0 * est2 - est1) / 3.0
    value = float(np.mean(extrap))
    if n_batches > 1:
        stderr = float(np.std(extrap, ddof=1) / math.sqrt(n_batches))
    else:
        stderr = float("nan")
    return value, stderr


def cap_coverage_mc(
    q: float,
    N: int,
    n_experiments: int = 40,
    points_per_experiment: int = 2000,
    seed: int = 0,
    n_batches: int = 1,
) -> Tuple[float, float]:
    """Measured covered fraction after dropping N random caps of area fraction q.

    Each experiment drops its own caps and measures the covered fraction of
    fresh uniform test points; returns (mean fraction, standard error of the
    mean).  A cap of area fraction q covers directions within angular cosine
    1 - 2q of its center.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    cos_thresh = 1.0 - 2.0 * q
    n_batches = max(1, int(n_batches))
    fractions = np.empty(n_experiments)
    for e in range(n_experiments):
        rng = np.random.default_rng([seed, e % n_batches, e])
        axes = rng.normal(size=(N, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        pts = rng.normal(size=(points_per_experiment, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        covered = (pts @ axes.T) >= cos_thresh
        fractions[e] = float(np.mean(np.any(covered, axis=1)))
    mean = float(np.mean(fractions))
    stderr = float(np.std(fractions, ddof=1) / math.sqrt(n_experiments))
    return mean, stderr


def vcone_mc(
    R: float,
    rho: float,
    n_samples: int = 400_000,
    seed: int = 0,
    n_batches: int = 1,
) -> Tuple[float, float]:
    """Monte-Carlo volume of {x in B(0, R) : x . sigma >= |x| rho / R}.

    Counts uniform ball samples satisfying the membership inequality with
    sigma the z axis; returns (volume estimate, standard error).
    """
    if not R > 0.0:
        raise ValueError(f"R must be positive, got {R}")
    if not 0.0 <= rho <= R:
        raise ValueError(f"rho must lie in [0, R], got {rho}")
    n_batches = max(1, int(n_batches))
    per_batch = int(n_samples) // n_batches
    hits = 0
    total = 0
    for b in range(n_batches):
        rng = np.random.default_rng([seed, b])
        u = rng.normal(size=(per_batch, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = R * rng.uniform(size=(per_batch, 1)) ** (1.0 / 3.0)
        x = rad * u
        lhs = x[:, 2]
        rhs_val = np.linalg.norm(x, axis=1) * rho / R
        hits += int(np.count_nonzero(lhs >= rhs_val))
        total += per_batch
    p = hits / total
    ball = 4.0 / 3.0 * math.pi * R ** 3
    stderr = math.sqrt(max(p * (1.0 - p), 1e-300) / total) * ball
    return p * ball, stderr
