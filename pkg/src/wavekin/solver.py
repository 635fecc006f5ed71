"""Conservative spectral discretization on a uniform frequency grid.

The transformed density g(omega) = mho * f * |k| turns the radial collision
operator into a triple sum with the test-function bracket

    -phi(w) - phi(w1) + phi(w2) + phi(w + w1 - w2).

On a uniform grid w_i = i*h the fourth frequency w_i + w_j - w_l lands exactly
on node m = i + j - l, so each tabulated interaction deposits the conservative
four-point stencil (-rho, -rho, +rho, +rho) at nodes (i, j, l, m) with

    rho = W_ijl * g_i * g_j * g_l * h^2.

Both sum(rhs) and sum(rhs * omega) then cancel identically, term by term:
mass and energy conservation hold to rounding error for any state, with no
quadrature tuning.  Interactions are truncated by whole interaction classes
(see build_kernel_table) so the convexity monotonicity of the continuum
operator survives discretization as well.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from wavekin.dispersion import DispersionRelation, eval_mho, eval_omega, invert_omega
from wavekin.collision_kernel import KernelWeights
from wavekin import diagnostics as _diag

__all__ = [
    "OmegaGrid",
    "SpectrumState",
    "KernelTable",
    "build_kernel_table",
    "save_table",
    "load_table",
    "rhs",
    "rhs_with_scale",
    "step",
    "evolve",
    "transform_f_to_g",
    "transform_g_to_f",
    "gaussian_bump",
    "ring_in_r",
    "state_from_file",
    "StiffnessError",
    "ConservationError",
    "MemoryBudgetError",
]

_TABLE_FORMAT_VERSION = 1


class StiffnessError(RuntimeError):
    """Step-size halving exhausted without restoring nonnegativity."""

    def __init__(self, message: str, state: "SpectrumState"):
        super().__init__(message)
        self.state = state


class ConservationError(RuntimeError):
    """Mass or energy drifted beyond the guaranteed tolerance."""


class MemoryBudgetError(MemoryError):
    """Kernel table would exceed the configured memory budget."""


@dataclass(frozen=True, eq=False)
class OmegaGrid:
    """Uniform frequency grid with precomputed radii and mho weights.

    Nodes are omega_i = i*h for i = 0..n_nodes-1.  Uniform spacing is what
    makes the resonance combination omega_i + omega_j - omega_l land exactly
    on node i + j - l.
    """

    d: DispersionRelation
    n_nodes: int
    h: float
    omega: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    mho: np.ndarray = field(repr=False)

    def __init__(self, d: DispersionRelation, n_nodes: int, omega_max: float):
        if not (isinstance(n_nodes, (int, np.integer)) and n_nodes >= 2):
            raise ValueError(f"n_nodes must be an integer >= 2, got {n_nodes!r}")
        if not omega_max > 0.0:
            raise ValueError(f"omega_max must be positive, got {omega_max}")
        h = float(omega_max) / (int(n_nodes) - 1)
        self._init_from_spacing(d, int(n_nodes), h)

    @classmethod
    def from_spacing(cls, d: DispersionRelation, n_nodes: int, h: float) -> "OmegaGrid":
        if not h > 0.0:
            raise ValueError(f"spacing must be positive, got {h}")
        grid = object.__new__(cls)
        grid._init_from_spacing(d, int(n_nodes), float(h))
        return grid

    def _init_from_spacing(self, d: DispersionRelation, n_nodes: int, h: float) -> None:
        omega = np.arange(n_nodes, dtype=float) * h
        r = np.array([invert_omega(d, w) for w in omega])
        # the origin node carries no measure and no interactions, so its mho
        # entry is never read; store 0 rather than evaluate at r = 0 (which
        # is undefined for iota = 0)
        mho = np.zeros(n_nodes)
        mho[1:] = [eval_mho(d, x) for x in r[1:]]
        if not np.all(np.diff(r) > 0.0):
            raise ValueError("grid radii must be strictly increasing")
        for name, value in (
            ("d", d), ("n_nodes", n_nodes), ("h", h),
            ("omega", omega), ("r", r), ("mho", mho),
        ):
            object.__setattr__(self, name, value)
        for arr in (omega, r, mho):
            arr.flags.writeable = False

    @property
    def omega_max(self) -> float:
        return float(self.omega[-1])

    def describe_key(self, kw: Optional[KernelWeights] = None) -> str:
        """Stable identity string for cache keying."""
        d = self.d
        probes = [eval_omega(d, x) for x in (0.5, 1.0, 2.0, 3.7)]
        parts = [
            f"v{_TABLE_FORMAT_VERSION}", d.kind,
            float(d.alpha).hex(), float(d.alpha_prime).hex(),
            float(d.c_omega_lower).hex(), float(d.c_omega_upper).hex(),
            float(d.c_mho).hex(), float(d.iota).hex(),
            *[float(p).hex() for p in probes],
            str(self.n_nodes), float(self.h).hex(),
        ]
        if kw is not None:
            parts += [float(kw.c_q).hex(), repr(kw.cutoff_n)]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()


@dataclass(eq=False)
class SpectrumState:
    """Nonnegative spectral density g per node, tied to its grid."""

    g: np.ndarray
    time: float
    grid: OmegaGrid

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"state has {g.shape} values for a {self.grid.n_nodes}-node grid"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError("state values must be finite")
        if np.any(g < 0.0):
            raise ValueError(f"state values must be nonnegative (min {g.min():g})")
        self.g = g
        self.time = float(self.time)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Precomputed interaction entries (i, j, l, m, W) on a grid.

    Entries are deduplicated over the i <-> j symmetry: only i <= j is stored
    and ``mult`` records the multiplicity (2 off the diagonal).  ``coef``
    folds mult * W * h^2 so the right-hand side is a single gather/scatter.
    Ordering is lexicographic in (i, j, l), so rebuilds are bit-identical.
    """

    grid: OmegaGrid
    kw: KernelWeights
    i: np.ndarray = field(repr=False)
    j: np.ndarray = field(repr=False)
    l: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    mult: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)

    @property
    def n_entries(self) -> int:
        return int(self.i.size)


def _chi_mask(grid: OmegaGrid, kw: KernelWeights) -> np.ndarray:
    r = grid.r
    if math.isfinite(kw.cutoff_n):
        return (r >= 1.0 / kw.cutoff_n) & (r < kw.cutoff_n)
    mask = np.ones(grid.n_nodes, dtype=bool)
    mask[0] = False  # the origin node carries no interactions
    return mask


def _class_valid(i: int, j: int, l_arr: np.ndarray, n: int) -> np.ndarray:
    """Whole-class retention test for integration triples (i, j, l), i <= j.

    An unordered triple {x >= y >= z} stands for three resonance pairings
    whose fourth indices are x+y-z, x+z-y and y+z-x.  Convexity of test
    functions makes the pairings' brackets cancel only jointly, so a triple
    is either kept with every pairing whose fourth index is a valid node, or
    dropped entirely: the criterion is that the largest fourth index x+y-z
    stays below n.  Keeping a partial class would expose bare negative
    brackets and break the monotonicity of convex functionals.
    """
    m = i + j - l_arr
    largest = np.where(l_arr <= i, m, l_arr + j - i)
    return (m >= 1) & (largest <= n - 1)


def build_kernel_table(
    kw: KernelWeights,
    d: DispersionRelation,
    grid: OmegaGrid,
    max_bytes: int = 512 * 2 ** 20,
    cache_path: Optional[str] = None,
) -> KernelTable:
    """Enumerate admissible interaction triples and their kernel weights.

    W_ijl = c_q * mho(r_m) * min(r_i, r_j, r_l, r_m, n) / (r_i r_j r_l),
    restricted by the radius band [1/n, n) on the three integration indices
    and by whole-class domain truncation (see _class_valid).  Entries with a
    zero weight (any index at the origin) are pruned.

    Raises MemoryBudgetError, before allocating, if the entry arrays would
    exceed ``max_bytes``.
    """
    if grid.d is not d:
        # allow equal-valued dispersions, but insist they agree numerically
        for probe in (0.3, 1.0, 2.5):
            if not math.isclose(eval_omega(grid.d, probe), eval_omega(d, probe),
                                rel_tol=1e-12):
                raise ValueError("grid was built with a different dispersion")

    if cache_path is not None:
        cached = load_table(cache_path, grid, kw, missing_ok=True)
        if cached is not None:
            return cached

    n = grid.n_nodes
    r = grid.r
    mho = grid.mho
    chi = _chi_mask(grid, kw)
    ncut = kw.cutoff_n
    l_all = np.arange(1, n, dtype=np.int64)
    chi_l = chi[1:]

    # First pass: count entries so the budget check precedes allocation.
    count = 0
    for i in range(1, n):
        if not chi[i]:
            continue
        for j in range(i, n):
            if not chi[j]:
                continue
            count += int(np.count_nonzero(_class_valid(i, j, l_all, n) & chi_l))
    bytes_needed = count * (4 * 4 + 8 * 2 + 1 + 8)
    if bytes_needed > max_bytes:
        raise MemoryBudgetError(
            f"kernel table needs ~{bytes_needed / 2**20:.0f} MiB for {count} "
            f"entries, over the {max_bytes / 2**20:.0f} MiB budget; raise "
            "max_bytes or reduce n_nodes"
        )

    ii = np.empty(count, dtype=np.int32)
    jj = np.empty(count, dtype=np.int32)
    ll = np.empty(count, dtype=np.int32)
    mm = np.empty(count, dtype=np.int32)
    ww = np.empty(count, dtype=float)
    mu = np.empty(count, dtype=np.int8)

    pos = 0
    for i in range(1, n):
        if not chi[i]:
            continue
        for j in range(i, n):
            if not chi[j]:
                continue
            valid = _class_valid(i, j, l_all, n) & chi_l
            if not valid.any():
                continue
            l_v = l_all[valid]
            m_v = i + j - l_v
            least = np.minimum(np.minimum(r[l_v], r[m_v]), min(r[i], r[j]))
            if math.isfinite(ncut):
                np.minimum(least, ncut, out=least)
            w_v = kw.c_q * mho[m_v] * least / (r[i] * r[j] * r[l_v])
            k = l_v.size
            ii[pos:pos + k] = i
            jj[pos:pos + k] = j
            ll[pos:pos + k] = l_v
            mm[pos:pos + k] = m_v
            ww[pos:pos + k] = w_v
            mu[pos:pos + k] = 1 if i == j else 2
            pos += k
    assert pos == count

    coef = ww * mu * grid.h ** 2
    table = KernelTable(grid=grid, kw=kw, i=ii, j=jj, l=ll, m=mm,
                        w=ww, mult=mu, coef=coef)
    for arr in (ii, jj, ll, mm, ww, mu, coef):
        arr.flags.writeable = False
    if cache_path is not None:
        save_table(cache_path, table)
    return table


def save_table(path: str, table: KernelTable) -> None:
    """Dump a kernel table, keyed by grid/dispersion/cutoff identity."""
    np.savez_compressed(
        path,
        version=np.int64(_TABLE_FORMAT_VERSION),
        key=np.frombuffer(bytes.fromhex(table.grid.describe_key(table.kw)), dtype=np.uint8),
        i=table.i, j=table.j, l=table.l, m=table.m,
        w=table.w, mult=table.mult,
    )


def load_table(
    path: str,
    grid: OmegaGrid,
    kw: KernelWeights,
    missing_ok: bool = False,
) -> Optional[KernelTable]:
    """Load a cached table; returns None on a key mismatch or missing file."""
    import os

    if not os.path.exists(path):
        if missing_ok:
            return None
        raise FileNotFoundError(path)
    with np.load(path) as data:
        if int(data["version"]) != _TABLE_FORMAT_VERSION:
            return None
        key = bytes(data["key"]).hex()
        if key != grid.describe_key(kw):
            return None
        ww = data["w"]
        mu = data["mult"]
        table = KernelTable(
            grid=grid, kw=kw,
            i=data["i"], j=data["j"], l=data["l"], m=data["m"],
            w=ww, mult=mu, coef=ww * mu * grid.h ** 2,
        )
    return table


def _check_same_grid(table: KernelTable, state: SpectrumState) -> None:
    if state.grid is not table.grid:
        g1, g2 = state.grid, table.grid
        if g1.n_nodes != g2.n_nodes or g1.h != g2.h:
            raise ValueError(
                "state and kernel table live on different grids "
                f"({g1.n_nodes} nodes, h={g1.h:g} vs {g2.n_nodes}, h={g2.h:g})"
            )


def _rhs_of_g(table: KernelTable, g: np.ndarray) -> np.ndarray:
    n = table.grid.n_nodes
    rho = table.coef * g[table.i] * g[table.j] * g[table.l]
    out = np.bincount(table.l, weights=rho, minlength=n)
    out += np.bincount(table.m, weights=rho, minlength=n)
    out -= np.bincount(table.i, weights=rho, minlength=n)
    out -= np.bincount(table.j, weights=rho, minlength=n)
    return out


def rhs(table: KernelTable, state: SpectrumState) -> np.ndarray:
    """Instantaneous dg/dt per node from the four-point interaction stencil."""
    _check_same_grid(table, state)
    return _rhs_of_g(table, state.g)


def rhs_with_scale(table: KernelTable, state: SpectrumState):
    """rhs plus the per-node sum of |deposits|, the conservation error scale."""
    _check_same_grid(table, state)
    g = state.g
    n = table.grid.n_nodes
    rho = table.coef * g[table.i] * g[table.j] * g[table.l]
    parts = [np.bincount(idx, weights=rho, minlength=n)
             for idx in (table.l, table.m, table.i, table.j)]
    out = parts[0] + parts[1] - parts[2] - parts[3]
    scale = parts[0] + parts[1] + parts[2] + parts[3]
    return out, scale


def step(
    table: KernelTable,
    state: SpectrumState,
    dt: float,
    method: str = "rk4",
) -> SpectrumState:
    """Advance one explicit step, halving dt (at most 30 times) to keep g >= 0.

    The stencil conserves mass and energy stage by stage, so any accepted
    step inherits conservation to rounding error regardless of dt.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    _check_same_grid(table, state)

    g0 = state.g
    trial = float(dt)
    for _ in range(31):
        if method == "rk4":
            k1 = _rhs_of_g(table, g0)
            k2 = _rhs_of_g(table, g0 + 0.5 * trial * k1)
            k3 = _rhs_of_g(table, g0 + 0.5 * trial * k2)
            k4 = _rhs_of_g(table, g0 + trial * k3)
            g1 = g0 + (trial / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            g1 = g0 + trial * _rhs_of_g(table, g0)
        if np.all(g1 >= 0.0):
            return SpectrumState(g=g1, time=state.time + trial, grid=state.grid)
        trial *= 0.5
    raise StiffnessError(
        f"could not retain nonnegativity from dt={dt:g} after 30 halvings "
        f"at t={state.time:g}; the system is too stiff for an explicit step",
        state,
    )


def evolve(
    table: KernelTable,
    state0: SpectrumState,
    t_end: float,
    output_every: float = 0.0,
    *,
    diagnostics_config: Optional["_diag.DiagnosticsConfig"] = None,
    max_steps: Optional[int] = None,
    safety: float = 0.2,
    floor_frac: float = 1e-3,
    max_dt: Optional[float] = None,
    method: str = "rk4",
):
    """Integrate to t_end with a rate-limited adaptive step.

    The step bound is dt <= safety / max_i(|rhs_i| / max(g_i, floor)) with
    floor = floor_frac * max(g): nodes carrying appreciable density change by
    at most ~safety per step.  ``max_dt`` caps the step on top of that.
    Diagnostics are recorded at t=0, every ``output_every`` time units (every
    accepted step if 0), and at the end.  Returns a list of (state, record)
    pairs.
    """
    if t_end < 0.0:
        raise ValueError(f"t_end must be nonnegative, got {t_end}")
    if max_dt is not None and not max_dt > 0.0:
        raise ValueError(f"max_dt must be positive, got {max_dt}")
    if max_steps is not None and max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    _check_same_grid(table, state0)
    cfg = diagnostics_config if diagnostics_config is not None else _diag.DiagnosticsConfig()

    def record(s: SpectrumState):
        return _diag.make_record(s, cfg, table=table)

    out = [(state0, record(state0))]
    if t_end == 0.0:
        return out

    h = table.grid.h
    mass0 = float(np.sum(state0.g) * h)
    target = state0.time + t_end
    next_output = state0.time + output_every if output_every > 0.0 else None

    state = state0
    steps = 0
    tiny = 1e-14 * max(1.0, abs(target))
    while state.time < target - tiny:
        if max_steps is not None and steps >= max_steps:
            break
        r = _rhs_of_g(table, state.g)
        gmax = float(state.g.max(initial=0.0))
        rmax = float(np.max(np.abs(r))) if r.size else 0.0
        if rmax == 0.0 or gmax == 0.0:
            dt = target - state.time
        else:
            floor = floor_frac * gmax
            rate = float(np.max(np.abs(r) / np.maximum(state.g, floor)))
            dt = safety / rate if rate > 0.0 else target - state.time
        if max_dt is not None:
            dt = min(dt, max_dt)
        dt = min(dt, target - state.time)
        state = step(table, state, dt, method=method)
        steps += 1
        if next_output is None:
            out.append((state, record(state)))
        elif state.time >= next_output - tiny:
            out.append((state, record(state)))
            while next_output <= state.time + tiny:
                next_output += output_every

    if out[-1][0] is not state:
        out.append((state, record(state)))

    mass_final = float(np.sum(state.g) * h)
    drift = abs(mass_final - mass0) / max(mass0, 1e-300)
    if drift > 1e-10:
        raise ConservationError(
            f"mass drifted by {drift:.3e} relative over the run (tolerance 1e-10)"
        )
    return out


def transform_f_to_g(
    d: DispersionRelation,
    grid: OmegaGrid,
    f_values: Sequence[float],
) -> SpectrumState:
    """Map a radial density f sampled at the grid radii to g = mho * f * r.

    The origin node is set to zero: r = 0 carries no measure and no
    interactions, and the convention keeps the inverse transform total.
    """
    f = np.asarray(f_values, dtype=float)
    if f.shape != (grid.n_nodes,):
        raise ValueError(f"expected {grid.n_nodes} samples, got {f.shape}")
    if np.any(f < 0.0):
        raise ValueError("f must be nonnegative")
    g = grid.mho * f * grid.r
    g[0] = 0.0
    return SpectrumState(g=g, time=0.0, grid=grid)


def transform_g_to_f(state: SpectrumState) -> np.ndarray:
    """Inverse of transform_f_to_g; the origin node maps back to zero."""
    grid = state.grid
    f = np.zeros_like(state.g)
    nz = grid.r > 0.0
    f[nz] = state.g[nz] / (grid.mho[nz] * grid.r[nz])
    return f


def gaussian_bump(
    grid: OmegaGrid,
    center: float,
    width: float,
    amplitude: float,
) -> SpectrumState:
    """Gaussian profile in frequency: g(w) = A exp(-(w - center)^2 / 2 width^2)."""
    if width <= 0.0 or amplitude < 0.0:
        raise ValueError("width must be positive and amplitude nonnegative")
    g = amplitude * np.exp(-0.5 * ((grid.omega - center) / width) ** 2)
    g[0] = 0.0
    return SpectrumState(g=g, time=0.0, grid=grid)


def ring_in_r(
    d: DispersionRelation,
    grid: OmegaGrid,
    r_center: float,
    width: float,
    amplitude: float,
) -> SpectrumState:
    """Gaussian ring in radius, specified on f and transformed to g."""
    if width <= 0.0 or amplitude < 0.0:
        raise ValueError("width must be positive and amplitude nonnegative")
    f = amplitude * np.exp(-0.5 * ((grid.r - r_center) / width) ** 2)
    return transform_f_to_g(d, grid, f)


def state_from_file(grid: OmegaGrid, path: str) -> SpectrumState:
    """Load g from a text table: either one g column or (omega, g) pairs."""
    data = np.loadtxt(path, dtype=float)
    if data.ndim == 1:
        g = data
    elif data.ndim == 2 and data.shape[1] == 2:
        w, g = data[:, 0], data[:, 1]
        if w.shape != grid.omega.shape or np.max(np.abs(w - grid.omega)) > 1e-9 * grid.h:
            raise ValueError(f"{path}: frequency column does not match the grid")
    else:
        raise ValueError(f"{path}: expected 1 or 2 columns, got shape {data.shape}")
    if g.shape != (grid.n_nodes,):
        raise ValueError(
            f"{path}: expected {grid.n_nodes} values, got {g.shape[0]}"
        )
    return SpectrumState(g=np.array(g, dtype=float), time=0.0, grid=grid)
