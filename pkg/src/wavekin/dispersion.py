"""Convex radial dispersion relations and the derived weight mho.

A dispersion relation assigns a frequency omega(r) to the radius r = |k| of a
wavenumber.  Everything downstream only uses the radial profile, so the
representation is one callable for omega, one for its derivative, plus the
growth constants that make the structural assumptions checkable:

    omega(0) = 0, omega strictly increasing and convex,
    omega(r) >= c_omega_lower * r**alpha           for all r,
    omega(r) <= c_omega_upper * r**alpha_prime     for r < 1,
    mho(r) = r / omega'(r) <= c_mho * r**iota, nondecreasing.

The power-law family omega(r) = r**alpha with alpha in (1, 2] satisfies all of
these with iota = 2 - alpha and c_mho = 1/alpha; it is the workhorse.  Custom
profiles supply callables and constants, and the constructor spot-checks the
inequalities on sampled grids rather than symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DispersionRelation",
    "eval_omega",
    "eval_mho",
    "invert_omega",
]

# Sampling used to validate the structural assumptions at construction time.
_CHECK_GRID = np.concatenate([
    np.logspace(-3, 3, 121),
    np.linspace(1e-3, 10.0, 200),
])
_CHECK_GRID.flags.writeable = False
_CONVEXITY_TOL = 1e-10


@dataclass(frozen=True)
class DispersionRelation:
    """Immutable radial dispersion relation; safe to share across workers.

    Use the factories :meth:`power_law` and :meth:`custom` rather than the
    bare constructor so the assumption checks run.
    """

    kind: str
    alpha: float
    alpha_prime: float
    c_omega_lower: float
    c_omega_upper: float
    c_mho: float
    iota: float
    omega_fn: Optional[Callable[[float], float]] = field(default=None, repr=False)
    omega_prime_fn: Optional[Callable[[float], float]] = field(default=None, repr=False)

    @classmethod
    def power_law(cls, alpha: float) -> "DispersionRelation":
        """omega(r) = r**alpha with alpha in (1, 2]."""
        if not (isinstance(alpha, (int, float)) and math.isfinite(alpha)):
            raise ValueError(f"alpha must be a finite number, got {alpha!r}")
        if not 1.0 < alpha <= 2.0:
            raise ValueError(
                f"power-law exponent must lie in (1, 2], got {alpha}; "
                "steeper or shallower growth is outside the supported class"
            )
        d = cls(
            kind="power_law",
            alpha=float(alpha),
            alpha_prime=float(alpha),
            c_omega_lower=1.0,
            c_omega_upper=1.0,
            c_mho=1.0 / float(alpha),
            iota=2.0 - float(alpha),
        )
        d.check_assumptions()
        return d

    @classmethod
    def custom(
        cls,
        omega: Callable[[float], float],
        omega_prime: Callable[[float], float],
        *,
        alpha: float,
        alpha_prime: float,
        c_omega_lower: float,
        c_omega_upper: float,
        c_mho: float,
        iota: float,
    ) -> "DispersionRelation":
        """Wrap user-supplied omega and omega' with declared constants.

        The constants are not derived from the callables; they are promises,
        verified on a sampled grid by :meth:`check_assumptions`.
        """
        if not 1.0 < alpha <= 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {alpha}")
        if not 1.0 < alpha_prime <= alpha:
            raise ValueError(
                f"alpha_prime must satisfy alpha >= alpha_prime > 1, got {alpha_prime}"
            )
        if c_omega_lower <= 0 or c_omega_upper <= 0:
            raise ValueError("growth constants must be positive")
        if c_mho < 0:
            raise ValueError("c_mho must be nonnegative")
        if not 0.0 <= iota <= 1.0:
            raise ValueError(f"iota must lie in [0, 1], got {iota}")
        d = cls(
            kind="custom",
            alpha=float(alpha),
            alpha_prime=float(alpha_prime),
            c_omega_lower=float(c_omega_lower),
            c_omega_upper=float(c_omega_upper),
            c_mho=float(c_mho),
            iota=float(iota),
            omega_fn=omega,
            omega_prime_fn=omega_prime,
        )
        d.check_assumptions()
        return d

    def check_assumptions(self, r_samples: Optional[np.ndarray] = None) -> None:
        """Verify the structural assumptions on a sampled radius grid.

        Raises ValueError naming the first violated inequality.  A passing
        check is evidence, not proof: the grid is finite.
        """
        r = _CHECK_GRID if r_samples is None else np.asarray(r_samples, dtype=float)
        w = np.array([eval_omega(self, float(x)) for x in r])

        if eval_omega(self, 0.0) != 0.0:
            raise ValueError("omega(0) must be 0")
        if np.any(w <= 0.0):
            raise ValueError("omega must be positive for r > 0")

        lower = self.c_omega_lower * r ** self.alpha
        if np.any(w < lower * (1.0 - 1e-9)):
            i = int(np.argmax(w < lower * (1.0 - 1e-9)))
            raise ValueError(
                f"lower growth bound violated at r={r[i]:g}: "
                f"omega={w[i]:g} < {lower[i]:g}"
            )
        small = r < 1.0
        upper = self.c_omega_upper * r[small] ** self.alpha_prime
        if np.any(w[small] > upper * (1.0 + 1e-9)):
            i = int(np.argmax(w[small] > upper * (1.0 + 1e-9)))
            raise ValueError(
                f"small-radius upper bound violated at r={r[small][i]:g}"
            )

        mho = np.array([eval_mho(self, float(x)) for x in r])
        cap = self.c_mho * r ** self.iota
        if np.any(mho > cap * (1.0 + 1e-9)):
            i = int(np.argmax(mho > cap * (1.0 + 1e-9)))
            raise ValueError(
                f"mho bound violated at r={r[i]:g}: mho={mho[i]:g} > {cap[i]:g}"
            )
        order = np.argsort(r)
        dm = np.diff(mho[order])
        if np.any(dm < -1e-12 * max(1.0, float(np.max(mho)))):
            raise ValueError("mho must be nondecreasing in r")

        # Convexity surrogate: nonnegative second differences on a uniform grid.
        h = 1e-2
        ru = np.arange(h, 10.0, h)
        wu = np.array([eval_omega(self, float(x)) for x in ru])
        second = wu[:-2] + wu[2:] - 2.0 * wu[1:-1]
        if np.any(second < -_CONVEXITY_TOL):
            raise ValueError("omega fails the convexity check (second differences)")
        if np.any(np.diff(wu) <= 0.0):
            raise ValueError("omega must be strictly increasing")


def eval_omega(d: DispersionRelation, r) -> float:
    """Frequency at radius r.  Accepts scalars or arrays; r must be >= 0."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or not np.all(np.isfinite(r_arr)):
        raise ValueError(f"radius must be finite and nonnegative, got {r!r}")
    if d.kind == "power_law":
        out = r_arr ** d.alpha
    else:
        out = np.vectorize(d.omega_fn, otypes=[float])(r_arr)
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def eval_mho(d: DispersionRelation, r) -> float:
    """The weight mho(r) = r / omega'(r).

    For the power law this is (1/alpha) * r**(2-alpha).  At r = 0 the value is
    the limit 0 whenever iota > 0; with iota = 0 the limit need not exist and
    r = 0 is rejected.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or not np.all(np.isfinite(r_arr)):
        raise ValueError(f"radius must be finite and nonnegative, got {r!r}")
    if np.any(r_arr == 0.0) and d.iota <= 0.0:
        raise ValueError("mho(0) undefined when iota = 0")
    if d.kind == "power_law":
        out = np.where(r_arr == 0.0, 0.0, r_arr ** (2.0 - d.alpha) / d.alpha)
    else:
        def one(x: float) -> float:
            if x == 0.0:
                return 0.0
            dp = d.omega_prime_fn(x)
            if dp <= 0.0:
                raise ValueError(f"omega'({x:g}) must be positive")
            return x / dp
        out = np.vectorize(one, otypes=[float])(r_arr)
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def invert_omega(d: DispersionRelation, w: float) -> float:
    """Radius r with omega(r) = w, by bracketed bisection.

    The initial bracket [0, max(1, (w / c_omega_lower)**(1/alpha))] is valid
    because of the lower growth bound; it is widened defensively in case a
    custom profile only meets its declared constant marginally.  The result
    satisfies |omega(r) - w| <= 1e-12 * max(1, w).
    """
    if not (isinstance(w, (int, float)) and math.isfinite(w)):
        raise ValueError(f"target frequency must be finite, got {w!r}")
    w = float(w)
    if w < 0.0:
        raise ValueError(f"target frequency must be nonnegative, got {w}")
    if w == 0.0:
        return 0.0

    hi = max(1.0, (w / d.c_omega_lower) ** (1.0 / d.alpha))
    for _ in range(200):
        if eval_omega(d, hi) >= w:
            break
        hi *= 2.0
    else:
        raise ValueError(f"could not bracket omega = {w:g}")
    lo = 0.0

    # bisect the bracket down to machine width before checking the residual;
    # stopping on the frequency residual alone can leave the radius off by
    # ~tol/omega'(r), which is too loose where omega is flat
    tol = 1e-12 * max(1.0, w)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = eval_omega(d, mid)
        if fm == w:
            return mid
        if fm < w:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1e-6, hi):
            break
    r = 0.5 * (lo + hi)
    if abs(eval_omega(d, r) - w) > tol:
        raise ValueError(
            f"bisection failed to invert omega at w={w:g} (residual "
            f"{eval_omega(d, r) - w:g})"
        )
    return r
