"""Runtime functionals: conserved quantities, convex production, cascade trends.

Everything here is a pure read-only functional of a spectrum state or of a
time series of diagnostic records.  The headline check is
:func:`convex_production`: the discrete interaction stencil evaluated against
a convex test function is nonnegative up to rounding, mirroring the
monotonicity of the continuum operator, so a materially negative value always
indicates a solver defect rather than physics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

__all__ = [
    "DiagnosticsConfig",
    "DiagnosticsRecord",
    "mass",
    "energy",
    "band_energy",
    "low_mass",
    "convex_production",
    "production_scale",
    "make_record",
    "cascade_report",
    "kinked_low_pass",
    "smoothed_low_pass",
    "kinked_band_cap",
    "quadratic_test",
    "shifted_ramp",
    "test_function_registry",
]


@dataclass(frozen=True)
class DiagnosticsConfig:
    """What to record along an evolution."""

    band_radii: Tuple[float, ...] = ()
    deltas: Tuple[float, ...] = ()
    test_functions: Mapping[str, Callable[[np.ndarray], np.ndarray]] = field(
        default_factory=dict
    )


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    energy: float
    band_energy: Dict[float, float]
    low_mass: Dict[float, float]
    convex_production: Dict[str, float]


def mass(state) -> float:
    """Total density: rectangle-rule sum h * sum(g)."""
    return float(np.sum(state.g) * state.grid.h)


def energy(state) -> float:
    """Total energy: h * sum(g * omega)."""
    return float(np.sum(state.g * state.grid.omega) * state.grid.h)


def band_energy(state, d, R: float) -> float:
    """Energy carried by nodes with radius at most R."""
    if not R > 0.0:
        raise ValueError(f"band radius must be positive, got {R}")
    grid = state.grid
    sel = grid.r <= R
    return float(np.sum(state.g[sel] * grid.omega[sel]) * grid.h)


def low_mass(state, delta: float) -> float:
    """Density carried by nodes with frequency at most delta**2."""
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    grid = state.grid
    sel = grid.omega <= delta * delta
    return float(np.sum(state.g[sel]) * grid.h)


def _convexity_violation(phi_vals: np.ndarray) -> float:
    """Most negative second difference, normalized by the value scale."""
    if phi_vals.size < 3:
        return 0.0
    second = phi_vals[:-2] + phi_vals[2:] - 2.0 * phi_vals[1:-1]
    scale = max(1.0, float(np.max(np.abs(phi_vals))))
    return float(np.min(second)) / scale


def convex_production(table, state, phi: Callable, check_convexity: bool = True) -> float:
    """Production of the functional sum(g * phi(omega)) by the interactions.

    Computed as sum over table entries of
    mult * W * g_i g_j g_l * h^3 * [phi_l + phi_m - phi_i - phi_j].
    For convex phi the result is nonnegative up to rounding; for affine phi
    the bracket vanishes node by node.  Non-convex phi is rejected so that a
    negative return can only ever mean a broken kernel table.
    """
    grid = table.grid
    if state.grid is not grid and (state.grid.n_nodes != grid.n_nodes
                                   or state.grid.h != grid.h):
        raise ValueError("state and table grids differ")
    phi_vals = np.asarray(phi(grid.omega), dtype=float)
    if phi_vals.shape != grid.omega.shape:
        raise ValueError("phi must map the frequency grid to one value per node")
    if check_convexity:
        worst = _convexity_violation(phi_vals)
        if worst < -1e-10:
            raise ValueError(
                f"test function is not convex on the grid (second difference "
                f"{worst:.3e} of scale); refusing to report a sign"
            )
    g = state.g
    rho = table.coef * g[table.i] * g[table.j] * g[table.l]
    bracket = (phi_vals[table.l] + phi_vals[table.m]
               - phi_vals[table.i] - phi_vals[table.j])
    return float(np.sum(rho * bracket) * grid.h)


def production_scale(table, state, phi: Callable) -> float:
    """Sum of absolute bracket contributions; the tolerance scale for signs."""
    grid = table.grid
    phi_vals = np.asarray(phi(grid.omega), dtype=float)
    g = state.g
    rho = table.coef * g[table.i] * g[table.j] * g[table.l]
    bracket = (phi_vals[table.l] + phi_vals[table.m]
               - phi_vals[table.i] - phi_vals[table.j])
    return float(np.sum(np.abs(rho * bracket)) * grid.h)


def make_record(state, cfg: DiagnosticsConfig, table=None) -> DiagnosticsRecord:
    band = {float(R): band_energy(state, state.grid.d, R) for R in cfg.band_radii}
    low = {float(dd): low_mass(state, dd) for dd in cfg.deltas}
    prod: Dict[str, float] = {}
    if cfg.test_functions and table is not None:
        for name, phi in cfg.test_functions.items():
            prod[name] = convex_production(table, state, phi)
    return DiagnosticsRecord(
        time=state.time,
        mass=mass(state),
        energy=energy(state),
        band_energy=band,
        low_mass=low,
        convex_production=prod,
    )


# --- convex test functions -------------------------------------------------

def kinked_low_pass(c: float) -> Callable:
    """phi(w) = max(c - w, 0): convex with a kink at w = c."""
    def phi(w):
        return np.maximum(c - np.asarray(w, dtype=float), 0.0)
    return phi


def smoothed_low_pass(c: float, eps: float = 0.05) -> Callable:
    """C-infinity softplus version of max(c - w, 0), still convex."""
    if eps <= 0.0:
        raise ValueError("smoothing width must be positive")
    def phi(w):
        z = (c - np.asarray(w, dtype=float)) / eps
        # log1p(exp(z)) without overflow for large z
        return eps * (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))))
    return phi


def kinked_band_cap(theta: float) -> Callable:
    """phi(w) = max(1 - theta * w, 0), the capped low-frequency weight."""
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    def phi(w):
        return np.maximum(1.0 - theta * np.asarray(w, dtype=float), 0.0)
    return phi


def quadratic_test() -> Callable:
    def phi(w):
        w = np.asarray(w, dtype=float)
        return w * w
    return phi


def shifted_ramp(c: float) -> Callable:
    """phi(w) = max(w - c, 0)."""
    def phi(w):
        return np.maximum(np.asarray(w, dtype=float) - c, 0.0)
    return phi


def test_function_registry(ids: Iterable[str]) -> Dict[str, Callable]:
    """Build test functions from compact ids like 'low_pass:0.5' or 'quadratic'.

    Supported forms: low_pass:C, smooth_low_pass:C[:EPS], band_cap:THETA,
    ramp:C, quadratic.
    """
    arity = {"low_pass": (1, 1), "smooth_low_pass": (1, 2), "band_cap": (1, 1),
             "ramp": (1, 1), "quadratic": (0, 0)}
    out: Dict[str, Callable] = {}
    for ident in ids:
        parts = str(ident).split(":")
        name, args = parts[0], parts[1:]
        try:
            lo, hi = arity[name]
            if not lo <= len(args) <= hi:
                raise ValueError(f"expected {lo}..{hi} arguments")
            if name == "low_pass":
                out[ident] = kinked_low_pass(float(args[0]))
            elif name == "smooth_low_pass":
                eps = float(args[1]) if len(args) > 1 else 0.05
                out[ident] = smoothed_low_pass(float(args[0]), eps)
            elif name == "band_cap":
                out[ident] = kinked_band_cap(float(args[0]))
            elif name == "ramp":
                out[ident] = shifted_ramp(float(args[0]))
            else:
                out[ident] = quadratic_test()
        except (IndexError, ValueError, KeyError) as exc:
            raise ValueError(f"unrecognized test-function id {ident!r}") from exc
    return out


# --- trend reporting ---------------------------------------------------------

def _trend(times: np.ndarray, values: np.ndarray) -> Dict[str, float]:
    """Kendall tau and relative total change of a scalar time series."""
    if values.size < 2 or np.allclose(values, values[0]):
        tau = 0.0
    else:
        res = stats.kendalltau(times, values)
        tau = float(getattr(res, "statistic", res[0]))
        if math.isnan(tau):
            tau = 0.0
    first = float(values[0])
    last = float(values[-1])
    denom = max(abs(first), 1e-300)
    return {
        "first": first,
        "last": last,
        "kendall_tau": tau,
        "relative_change": (last - first) / denom,
    }


def cascade_report(
    series: Sequence[DiagnosticsRecord],
    discard_fraction: float = 0.2,
) -> Dict:
    """Trend summary of a diagnostics series, as a JSON-ready dict.

    The leading ``discard_fraction`` of the records is treated as transient
    and excluded from the trend statistics (the asymptotic statements say
    nothing about early times).  Reported per band radius: Kendall tau and
    total relative change of the band energy.  Reported per delta: the same
    for the low-frequency density, plus the fraction of total density below
    the threshold (the concentration surrogate).
    """
    records = list(series)
    if not records:
        raise ValueError("cascade_report needs a nonempty series")
    if not 0.0 <= discard_fraction < 1.0:
        raise ValueError(f"discard_fraction must be in [0, 1), got {discard_fraction}")

    start = int(len(records) * discard_fraction)
    kept = records[start:] if len(records) > 1 else records
    times = np.array([rec.time for rec in kept])

    masses = np.array([rec.mass for rec in kept])
    energies = np.array([rec.energy for rec in kept])
    all_masses = np.array([rec.mass for rec in records])
    all_energies = np.array([rec.energy for rec in records])

    report: Dict = {
        "n_records": len(records),
        "n_used": len(kept),
        "discard_fraction": discard_fraction,
        "t_start": float(records[0].time),
        "t_end": float(records[-1].time),
        "mass_drift_rel": float(
            np.max(np.abs(all_masses - all_masses[0])) / max(all_masses[0], 1e-300)
        ),
        "energy_drift_rel": float(
            np.max(np.abs(all_energies - all_energies[0])) / max(all_energies[0], 1e-300)
        ),
        "band_energy": {},
        "low_mass": {},
    }

    for R in kept[0].band_energy:
        vals = np.array([rec.band_energy[R] for rec in kept])
        entry = _trend(times, vals)
        entry["decreasing"] = bool(entry["kendall_tau"] < 0.0
                                   and entry["relative_change"] < 0.0)
        report["band_energy"][f"{R:g}"] = entry

    for dd in kept[0].low_mass:
        vals = np.array([rec.low_mass[dd] for rec in kept])
        entry = _trend(times, vals)
        tolerance = 1e-12 * max(masses.max(), 1e-300)
        entry["nondecreasing"] = bool(np.all(np.diff(vals) >= -tolerance))
        frac = vals / np.maximum(masses, 1e-300)
        entry["mass_fraction_first"] = float(frac[0])
        entry["mass_fraction_last"] = float(frac[-1])
        report["low_mass"][f"{dd:g}"] = entry

    prod_names = kept[0].convex_production.keys()
    if prod_names:
        report["convex_production_min"] = {
            name: float(min(rec.convex_production[name] for rec in kept))
            for name in prod_names
        }
    return report
