"""Run configuration: parsing, validation, and construction of run objects.

Configs are YAML documents with fixed blocks (dispersion, grid, kernel,
initial, integrator, diagnostics, output) plus scalar ``seed`` and
``threads``.  Parsing is strict: unknown keys, duplicate keys, type
mismatches, and out-of-range values are all reported with the offending key
and line.  Every field has a default, so the empty document is a valid
config.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Optional, Tuple

import yaml

from wavekin.collision_kernel import KernelWeights, DEFAULT_C_Q
from wavekin.diagnostics import DiagnosticsConfig, test_function_registry
from wavekin.dispersion import DispersionRelation
from wavekin.solver import (
    OmegaGrid,
    SpectrumState,
    gaussian_bump,
    ring_in_r,
    state_from_file,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config_file"]


class ConfigError(ValueError):
    """Invalid configuration; knows the key and source line when available."""

    def __init__(self, key: str, reason: str, line: Optional[int] = None):
        self.key = key
        self.reason = reason
        self.line = line
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"config error at {where}key '{key}': {reason}")


@dataclass(frozen=True)
class DispersionBlock:
    kind: str = "power_law"
    alpha: float = 2.0


@dataclass(frozen=True)
class GridBlock:
    n_nodes: int = 64
    omega_max: float = 4.0


@dataclass(frozen=True)
class OracleBlock:
    tail_cut: float = 1e4
    tol: float = 1e-3


@dataclass(frozen=True)
class KernelBlock:
    c_q: float = DEFAULT_C_Q
    cutoff_n: Optional[float] = None  # None means no truncation
    max_table_mb: float = 512.0
    table_cache: Optional[str] = None
    oracle: OracleBlock = field(default_factory=OracleBlock)


@dataclass(frozen=True)
class InitialBlock:
    preset: str = "gaussian_bump"
    center: Optional[float] = None     # gaussian_bump; default omega_max / 2
    width: Optional[float] = None      # default omega_max / 10 (or r-units for ring)
    amplitude: float = 1.0
    r_center: Optional[float] = None   # ring
    path: Optional[str] = None         # file preset


@dataclass(frozen=True)
class IntegratorBlock:
    t_end: float = 1.0
    output_every: float = 0.0
    dt0: Optional[float] = None        # optional ceiling on the adaptive step
    safety: float = 0.2
    max_steps: Optional[int] = None
    method: str = "rk4"


@dataclass(frozen=True)
class DiagnosticsBlock:
    band_radii: Tuple[float, ...] = ()
    deltas: Tuple[float, ...] = ()
    test_functions: Tuple[str, ...] = ()


@dataclass(frozen=True)
class OutputBlock:
    dir: Optional[str] = None
    dump_spectrum: bool = False


@dataclass(frozen=True)
class RunConfig:
    dispersion: DispersionBlock = field(default_factory=DispersionBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    kernel: KernelBlock = field(default_factory=KernelBlock)
    initial: InitialBlock = field(default_factory=InitialBlock)
    integrator: IntegratorBlock = field(default_factory=IntegratorBlock)
    diagnostics: DiagnosticsBlock = field(default_factory=DiagnosticsBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    seed: int = 0
    threads: int = 1

    # --- constructors for the run objects ---

    def make_dispersion(self) -> DispersionRelation:
        return DispersionRelation.power_law(self.dispersion.alpha)

    def make_grid(self, d: DispersionRelation) -> OmegaGrid:
        return OmegaGrid(d, self.grid.n_nodes, self.grid.omega_max)

    def make_kernel_weights(self) -> KernelWeights:
        n = self.kernel.cutoff_n
        return KernelWeights(c_q=self.kernel.c_q,
                             cutoff_n=math.inf if n is None else n)

    def make_initial_state(self, d: DispersionRelation, grid: OmegaGrid) -> SpectrumState:
        blk = self.initial
        if blk.preset == "gaussian_bump":
            center = blk.center if blk.center is not None else 0.5 * grid.omega_max
            width = blk.width if blk.width is not None else 0.1 * grid.omega_max
            return gaussian_bump(grid, center, width, blk.amplitude)
        if blk.preset == "ring":
            r_center = blk.r_center if blk.r_center is not None else 0.5 * grid.r[-1]
            width = blk.width if blk.width is not None else 0.1 * grid.r[-1]
            return ring_in_r(d, grid, r_center, width, blk.amplitude)
        if blk.preset == "file":
            return state_from_file(grid, blk.path)
        raise ConfigError("initial.preset", f"unknown preset {blk.preset!r}")

    def make_diagnostics_config(self) -> DiagnosticsConfig:
        return DiagnosticsConfig(
            band_radii=self.diagnostics.band_radii,
            deltas=self.diagnostics.deltas,
            test_functions=test_function_registry(self.diagnostics.test_functions),
        )

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        # inf is not valid YAML 1.1 across loaders; echo it as the string 'inf'
        if out["kernel"]["cutoff_n"] is None:
            out["kernel"]["cutoff_n"] = None
        out["diagnostics"]["band_radii"] = list(self.diagnostics.band_radii)
        out["diagnostics"]["deltas"] = list(self.diagnostics.deltas)
        out["diagnostics"]["test_functions"] = list(self.diagnostics.test_functions)
        return out


# --- YAML parsing with line tracking -----------------------------------------


def _compose_lines(text: str) -> Dict[str, int]:
    """Map dotted key paths to 1-based source lines, rejecting duplicates."""
    lines: Dict[str, int] = {}
    try:
        node = yaml.compose(io.StringIO(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError("<document>", f"not valid YAML: {exc}", line) from exc
    if node is None:
        return lines

    def walk(n, prefix: str) -> None:
        if isinstance(n, yaml.MappingNode):
            seen = set()
            for key_node, value_node in n.value:
                key = str(key_node.value)
                path = f"{prefix}.{key}" if prefix else key
                if key in seen:
                    raise ConfigError(path, "duplicate key",
                                      key_node.start_mark.line + 1)
                seen.add(key)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    walk(node, "")
    return lines


def _require(mapping: Dict, allowed: Dict[str, type], block: str,
             lines: Dict[str, int]) -> None:
    for key in mapping:
        path = f"{block}.{key}" if block else key
        if key not in allowed:
            raise ConfigError(
                path, f"unknown key (allowed: {', '.join(sorted(allowed))})",
                lines.get(path),
            )


def _num(value, path: str, lines: Dict[str, int], *,
         integer: bool = False, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}", lines.get(path))
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(path, f"expected an integer, got {value!r}", lines.get(path))
        return int(value)
    return float(value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML config; all fields have defaults."""
    lines = _compose_lines(text)
    try:
        data = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError("<document>", f"not valid YAML: {exc}", line) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be a mapping", 1)

    top_allowed = {
        "dispersion": dict, "grid": dict, "kernel": dict, "initial": dict,
        "integrator": dict, "diagnostics": dict, "output": dict,
        "seed": int, "threads": int,
    }
    _require(data, top_allowed, "", lines)

    def block(name: str) -> Dict:
        value = data.get(name, {})
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigError(name, "expected a mapping", lines.get(name))
        return value

    # dispersion
    disp = block("dispersion")
    _require(disp, {"kind": str, "alpha": float}, "dispersion", lines)
    kind = disp.get("kind", "power_law")
    if kind != "power_law":
        raise ConfigError(
            "dispersion.kind",
            f"only 'power_law' is configurable (got {kind!r}); custom "
            "dispersions are a library-level feature",
            lines.get("dispersion.kind"),
        )
    alpha = _num(disp.get("alpha", 2.0), "dispersion.alpha", lines)
    if not 1.0 < alpha <= 2.0:
        raise ConfigError(
            "dispersion.alpha",
            f"must lie in (1, 2], got {alpha:g}: growth outside that range is "
            "not covered by the supported dispersion class",
            lines.get("dispersion.alpha"),
        )

    # grid
    grd = block("grid")
    _require(grd, {"n_nodes": int, "omega_max": float}, "grid", lines)
    n_nodes = _num(grd.get("n_nodes", 64), "grid.n_nodes", lines, integer=True)
    if n_nodes < 2:
        raise ConfigError("grid.n_nodes", f"must be >= 2, got {n_nodes}",
                          lines.get("grid.n_nodes"))
    omega_max = _num(grd.get("omega_max", 4.0), "grid.omega_max", lines)
    if not omega_max > 0:
        raise ConfigError("grid.omega_max", f"must be positive, got {omega_max:g}",
                          lines.get("grid.omega_max"))

    # kernel
    ker = block("kernel")
    _require(ker, {"c_q": float, "cutoff_n": float, "max_table_mb": float,
                   "table_cache": str, "oracle": dict}, "kernel", lines)
    c_q = _num(ker.get("c_q", DEFAULT_C_Q), "kernel.c_q", lines)
    if not c_q > 0:
        raise ConfigError("kernel.c_q", f"must be positive, got {c_q:g}",
                          lines.get("kernel.c_q"))
    cutoff_n = _num(ker.get("cutoff_n"), "kernel.cutoff_n", lines, allow_none=True)
    if cutoff_n is not None and not cutoff_n > 1.0:
        raise ConfigError("kernel.cutoff_n", f"must exceed 1, got {cutoff_n:g}",
                          lines.get("kernel.cutoff_n"))
    max_table_mb = _num(ker.get("max_table_mb", 512.0), "kernel.max_table_mb", lines)
    table_cache = ker.get("table_cache")
    if table_cache is not None and not isinstance(table_cache, str):
        raise ConfigError("kernel.table_cache", "expected a path string",
                          lines.get("kernel.table_cache"))
    orc = ker.get("oracle", {}) or {}
    if not isinstance(orc, dict):
        raise ConfigError("kernel.oracle", "expected a mapping", lines.get("kernel.oracle"))
    _require(orc, {"tail_cut": float, "tol": float}, "kernel.oracle", lines)
    tail_cut = _num(orc.get("tail_cut", 1e4), "kernel.oracle.tail_cut", lines)
    if tail_cut < 100.0:
        raise ConfigError("kernel.oracle.tail_cut", f"must be >= 100, got {tail_cut:g}",
                          lines.get("kernel.oracle.tail_cut"))
    tol = _num(orc.get("tol", 1e-3), "kernel.oracle.tol", lines)
    if not tol > 0:
        raise ConfigError("kernel.oracle.tol", "must be positive",
                          lines.get("kernel.oracle.tol"))

    # initial
    ini = block("initial")
    _require(ini, {"preset": str, "center": float, "width": float,
                   "amplitude": float, "r_center": float, "path": str},
             "initial", lines)
    preset = ini.get("preset", "gaussian_bump")
    if preset not in ("gaussian_bump", "ring", "file"):
        raise ConfigError("initial.preset",
                          f"unknown preset {preset!r} (gaussian_bump, ring, file)",
                          lines.get("initial.preset"))
    if preset == "file" and not isinstance(ini.get("path"), str):
        raise ConfigError("initial.path", "file preset needs a path",
                          lines.get("initial.path") or lines.get("initial.preset"))
    amplitude = _num(ini.get("amplitude", 1.0), "initial.amplitude", lines)
    if amplitude < 0:
        raise ConfigError("initial.amplitude", "must be nonnegative",
                          lines.get("initial.amplitude"))
    width = _num(ini.get("width"), "initial.width", lines, allow_none=True)
    if width is not None and not width > 0:
        raise ConfigError("initial.width", f"must be positive, got {width:g}",
                          lines.get("initial.width"))

    # integrator
    intg = block("integrator")
    _require(intg, {"t_end": float, "output_every": float, "dt0": float,
                    "safety": float, "max_steps": int, "method": str},
             "integrator", lines)
    t_end = _num(intg.get("t_end", 1.0), "integrator.t_end", lines)
    if t_end < 0:
        raise ConfigError("integrator.t_end", f"must be nonnegative, got {t_end:g}",
                          lines.get("integrator.t_end"))
    output_every = _num(intg.get("output_every", 0.0), "integrator.output_every", lines)
    if output_every < 0:
        raise ConfigError("integrator.output_every", "must be nonnegative",
                          lines.get("integrator.output_every"))
    dt0 = _num(intg.get("dt0"), "integrator.dt0", lines, allow_none=True)
    if dt0 is not None and not dt0 > 0:
        raise ConfigError("integrator.dt0", "must be positive",
                          lines.get("integrator.dt0"))
    safety = _num(intg.get("safety", 0.2), "integrator.safety", lines)
    if not 0 < safety <= 1.0:
        raise ConfigError("integrator.safety", f"must lie in (0, 1], got {safety:g}",
                          lines.get("integrator.safety"))
    max_steps = _num(intg.get("max_steps"), "integrator.max_steps", lines,
                     integer=True, allow_none=True)
    if max_steps is not None and max_steps < 1:
        raise ConfigError("integrator.max_steps", "must be >= 1",
                          lines.get("integrator.max_steps"))
    method = intg.get("method", "rk4")
    if method not in ("rk4", "euler"):
        raise ConfigError("integrator.method", f"must be rk4 or euler, got {method!r}",
                          lines.get("integrator.method"))

    # diagnostics
    dia = block("diagnostics")
    _require(dia, {"band_radii": list, "deltas": list, "test_functions": list},
             "diagnostics", lines)

    def float_list(key: str) -> Tuple[float, ...]:
        raw = dia.get(key, [])
        if raw is None:
            return ()
        if not isinstance(raw, (list, tuple)):
            raise ConfigError(f"diagnostics.{key}", "expected a list",
                              lines.get(f"diagnostics.{key}"))
        out = []
        for v in raw:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"diagnostics.{key}", f"expected numbers, got {v!r}",
                                  lines.get(f"diagnostics.{key}"))
            out.append(float(v))
        return tuple(out)

    band_radii = float_list("band_radii")
    if any(R <= 0 for R in band_radii):
        raise ConfigError("diagnostics.band_radii", "radii must be positive",
                          lines.get("diagnostics.band_radii"))
    deltas = float_list("deltas")
    if any(x < 0 for x in deltas):
        raise ConfigError("diagnostics.deltas", "must be nonnegative",
                          lines.get("diagnostics.deltas"))
    tf_raw = dia.get("test_functions", []) or []
    if not isinstance(tf_raw, (list, tuple)):
        raise ConfigError("diagnostics.test_functions", "expected a list",
                          lines.get("diagnostics.test_functions"))
    test_functions = tuple(str(t) for t in tf_raw)
    try:
        test_function_registry(test_functions)
    except ValueError as exc:
        raise ConfigError("diagnostics.test_functions", str(exc),
                          lines.get("diagnostics.test_functions")) from exc

    # output
    out = block("output")
    _require(out, {"dir": str, "dump_spectrum": bool}, "output", lines)
    out_dir = out.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output.dir", "expected a path string", lines.get("output.dir"))
    dump = out.get("dump_spectrum", False)
    if not isinstance(dump, bool):
        raise ConfigError("output.dump_spectrum", f"expected true/false, got {dump!r}",
                          lines.get("output.dump_spectrum"))

    seed = _num(data.get("seed", 0), "seed", lines, integer=True)
    if seed < 0 or seed > 2 ** 64 - 1:
        raise ConfigError("seed", "must fit in an unsigned 64-bit integer",
                          lines.get("seed"))
    threads = _num(data.get("threads", 1), "threads", lines, integer=True)
    if threads < 1:
        raise ConfigError("threads", f"must be >= 1, got {threads}", lines.get("threads"))

    return RunConfig(
        dispersion=DispersionBlock(kind=kind, alpha=alpha),
        grid=GridBlock(n_nodes=n_nodes, omega_max=omega_max),
        kernel=KernelBlock(c_q=c_q, cutoff_n=cutoff_n, max_table_mb=max_table_mb,
                           table_cache=table_cache,
                           oracle=OracleBlock(tail_cut=tail_cut, tol=tol)),
        initial=InitialBlock(
            preset=preset,
            center=_num(ini.get("center"), "initial.center", lines, allow_none=True),
            width=width,
            amplitude=amplitude,
            r_center=_num(ini.get("r_center"), "initial.r_center", lines, allow_none=True),
            path=ini.get("path"),
        ),
        integrator=IntegratorBlock(t_end=t_end, output_every=output_every, dt0=dt0,
                                   safety=safety, max_steps=max_steps, method=method),
        diagnostics=DiagnosticsBlock(band_radii=band_radii, deltas=deltas,
                                     test_functions=test_functions),
        output=OutputBlock(dir=out_dir, dump_spectrum=dump),
        seed=seed,
        threads=threads,
    )


def load_config_file(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
