"""Batch front end: JSON experiment config in, CSV files and a manifest out.

Usage::

    semiclassical <mode> --config run.json [--output DIR] [--seed N] [--threads N]
    semiclassical validate --config run.json

Exit status is 0 on success, 2 for configuration errors and 3 when a
numerical stage fails.  ``manifest.json`` is written last, so a run
directory without it is incomplete.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classical import KINDS, PotentialSpec
from .convergence import bohm_trajectories, deterministic_sweep, statistical_sweep
from .hj_solver import hopf_lax_solve, velocity_field
from .minplus_core import Grid1D, SampledFunction, legendre_fenchel
from .quantum import (
    MARGIN_SIGMAS,
    CoherentStateParams,
    init_coherent_state,
    init_gaussian_packet,
    init_plane_wave,
    madelung_decompose,
    split_step_snapshots,
)

log = logging.getLogger(__name__)

MODES = ("hopf_lax", "schrodinger", "statistical_sweep", "deterministic_sweep", "bohm", "legendre")
INITIAL_TYPES = ("gaussian", "coherent", "plane")
LEGENDRE_FUNCTIONS = ("quadratic", "abs")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_SECTIONS = {
    "potential": {"kind": "free", "m": 1.0, "K": 0.0, "omega": None},
    "grid": {"x_min": None, "x_max": None, "n": None},
    "time": {"t_end": None, "dt": None, "output_every": 1},
    "initial": {"type": None, "x0": 0.0, "v0": 0.0, "sigma": None},
    "legendre": {"function": "quadratic", "p_min": -1.0, "p_max": 1.0, "n": 201},
}
_SCALARS = {"mode": None, "hbar": 1.0, "hbars": None, "particles": 1000, "seed": 0, "output_dir": "run"}

# sections each mode cannot run without
_NEEDS = {
    "hopf_lax": ("grid", "time", "initial"),
    "schrodinger": ("grid", "time", "initial"),
    "statistical_sweep": ("grid", "time", "initial", "hbars"),
    "deterministic_sweep": ("grid", "time", "initial", "hbars"),
    "bohm": ("grid", "time", "initial"),
    "legendre": ("grid",),
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class ExperimentConfig:
    mode: str
    potential: dict
    grid: dict
    time: dict
    initial: dict
    legendre: dict
    hbar: float = 1.0
    hbars: list | None = None
    particles: int = 1000
    seed: int = 0
    output_dir: str = "run"

    @property
    def pot(self) -> PotentialSpec:
        return PotentialSpec(**self.potential)

    @property
    def grid1d(self) -> Grid1D:
        return Grid1D(**self.grid)

    @property
    def output_times(self) -> np.ndarray:
        """Multiples of ``dt * output_every`` up to ``t_end`` (always including ``t_end``)."""
        t = self.time
        n = int(round(t["t_end"] / t["dt"]))
        steps = list(range(t["output_every"], n + 1, t["output_every"]))
        if not steps or steps[-1] != n:
            steps.append(n)
        return np.array(steps) * t["dt"]


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    stages: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _validate(raw: dict, mode: str | None) -> tuple[ExperimentConfig | None, list[str]]:
    problems = []
    if not isinstance(raw, dict):
        return None, ["top level must be a JSON object"]
    for key in raw:
        if key not in _SECTIONS and key not in _SCALARS:
            problems.append(f"unknown key {key!r}")
    cfg_mode = raw.get("mode")
    if mode is None:
        mode = cfg_mode
    elif cfg_mode is not None and cfg_mode != mode:
        problems.append(f"config mode {cfg_mode!r} does not match subcommand {mode!r}")
    if mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {mode!r}")
        return None, problems
    needs = _NEEDS[mode]

    sections = {}
    complete = set()  # required sections present with every required key
    for name, defaults in _SECTIONS.items():
        given = raw.get(name)
        if given is None:
            if name in needs:
                problems.append(f"missing required section {name!r}")
            sections[name] = dict(defaults)
            continue
        if not isinstance(given, dict):
            problems.append(f"{name!r} must be an object")
            sections[name] = dict(defaults)
            continue
        for key in given:
            if key not in defaults:
                problems.append(f"unknown key {name}.{key}")
        merged = {**defaults, **{k: v for k, v in given.items() if k in defaults}}
        missing = [k for k, v in merged.items()
                   if v is None and defaults[k] is None and k not in ("omega", "sigma")]
        if name in needs:
            problems.extend(f"missing required key {name}.{k}" for k in missing)
            if not missing:
                complete.add(name)
        sections[name] = merged
    scalars = {k: raw.get(k, d) for k, d in _SCALARS.items()}
    if "hbars" in needs and scalars["hbars"] is None:
        problems.append("missing required key 'hbars'")

    grid_ok = False
    if "grid" in complete:
        g = sections["grid"]
        if not (_is_num(g["x_min"]) and _is_num(g["x_max"])):
            problems.append("grid.x_min and grid.x_max must be finite numbers")
        elif g["x_min"] >= g["x_max"]:
            problems.append(f"grid.x_min={g['x_min']} must be < grid.x_max={g['x_max']}")
        if not (_is_int(g["n"]) and g["n"] >= 2):
            problems.append(f"grid.n must be an integer >= 2, got {g['n']!r}")
        grid_ok = not any(p.startswith("grid.") for p in problems)

    pot = sections["potential"]
    if pot["kind"] not in KINDS:
        problems.append(f"potential.kind must be one of {KINDS}, got {pot['kind']!r}")
    if not (_is_num(pot["m"]) and pot["m"] > 0):
        problems.append(f"potential.m must be > 0, got {pot['m']!r}")
    if not _is_num(pot["K"]):
        problems.append(f"potential.K must be a number, got {pot['K']!r}")
    if pot["kind"] == "harmonic" and not (_is_num(pot["omega"]) and pot["omega"] > 0):
        problems.append(f"potential.omega must be > 0 for the harmonic kind, got {pot['omega']!r}")

    time_ok = False
    if "time" in complete:
        t = sections["time"]
        if not (_is_num(t["dt"]) and t["dt"] > 0):
            problems.append(f"time.dt must be > 0, got {t['dt']!r}")
        elif not (_is_num(t["t_end"]) and t["t_end"] >= t["dt"]):
            problems.append(f"time.t_end must be >= time.dt, got {t['t_end']!r}")
        else:
            n = round(t["t_end"] / t["dt"])
            if abs(n * t["dt"] - t["t_end"]) > 1e-9 * t["t_end"]:
                problems.append(f"time.t_end={t['t_end']} is not an integer multiple of time.dt={t['dt']}")
            else:
                time_ok = True
        if not (_is_int(t["output_every"]) and t["output_every"] >= 1):
            problems.append(f"time.output_every must be an integer >= 1, got {t['output_every']!r}")
            time_ok = False

    init = sections["initial"]
    if "initial" in complete:
        if init["type"] not in INITIAL_TYPES:
            problems.append(f"initial.type must be one of {INITIAL_TYPES}, got {init['type']!r}")
        for key in ("x0", "v0"):
            if not _is_num(init[key]):
                problems.append(f"initial.{key} must be a number, got {init[key]!r}")
        if init["type"] == "gaussian" and not (_is_num(init["sigma"]) and init["sigma"] > 0):
            problems.append(f"initial.sigma must be > 0 for a gaussian, got {init['sigma']!r}")

    if not (_is_num(scalars["hbar"]) and scalars["hbar"] > 0):
        problems.append(f"hbar must be > 0, got {scalars['hbar']!r}")
    hb = scalars["hbars"]
    if hb is not None:
        if not (isinstance(hb, list) and hb and all(_is_num(h) and h > 0 for h in hb)):
            problems.append(f"hbars must be a non-empty list of positive numbers, got {hb!r}")
        elif any(b >= a for a, b in zip(hb, hb[1:])):
            problems.append(f"hbars must be strictly descending, got {hb}")
    if not (_is_int(scalars["particles"]) and scalars["particles"] >= 1):
        problems.append(f"particles must be an integer >= 1, got {scalars['particles']!r}")
    if not _is_int(scalars["seed"]):
        problems.append(f"seed must be an integer, got {scalars['seed']!r}")
    if not isinstance(scalars["output_dir"], str):
        problems.append("output_dir must be a string")

    if mode == "legendre":
        lg = sections["legendre"]
        if lg["function"] not in LEGENDRE_FUNCTIONS:
            problems.append(f"legendre.function must be one of {LEGENDRE_FUNCTIONS}, got {lg['function']!r}")
        if not (_is_num(lg["p_min"]) and _is_num(lg["p_max"]) and lg["p_min"] < lg["p_max"]):
            problems.append("legendre.p_min must be < legendre.p_max")
        if not (_is_int(lg["n"]) and lg["n"] >= 2):
            problems.append(f"legendre.n must be an integer >= 2, got {lg['n']!r}")

    # mode-specific preconditions of the dispatched operations
    if mode == "deterministic_sweep":
        if pot["kind"] != "harmonic":
            problems.append("deterministic_sweep needs potential.kind = 'harmonic'")
        if init["type"] != "coherent":
            problems.append("deterministic_sweep needs initial.type = 'coherent'")
    if mode == "statistical_sweep" and init["type"] != "gaussian":
        problems.append("statistical_sweep needs initial.type = 'gaussian' (an hbar-independent density)")
    if mode == "hopf_lax" and pot["kind"] == "harmonic" and time_ok and _is_num(pot["omega"]):
        cfg_t = sections["time"]
        n = int(round(cfg_t["t_end"] / cfg_t["dt"]))
        for k in range(cfg_t["output_every"], n + 1, cfg_t["output_every"]):
            if abs(np.sin(pot["omega"] * k * cfg_t["dt"])) < 1e-10:
                problems.append(f"hopf_lax output time {k * cfg_t['dt']} hits a harmonic caustic")
                break
    if grid_ok and "initial" in complete and init["type"] in ("gaussian", "coherent") and not problems:
        g = sections["grid"]
        if init["type"] == "gaussian":
            lo = init["x0"] - MARGIN_SIGMAS * init["sigma"]
            hi = init["x0"] + MARGIN_SIGMAS * init["sigma"]
        else:
            if pot["kind"] != "harmonic":
                problems.append("a coherent initial state needs potential.kind = 'harmonic'")
                return None, problems
            h = max(hb) if mode == "deterministic_sweep" else scalars["hbar"]
            p = CoherentStateParams(init["x0"], init["v0"], pot["omega"], pot["m"], h)
            lo, hi = -p.amplitude - MARGIN_SIGMAS * p.sigma, p.amplitude + MARGIN_SIGMAS * p.sigma
        if lo < g["x_min"] or hi > g["x_max"]:
            problems.append(f"grid [{g['x_min']}, {g['x_max']}] must contain [{lo:.4g}, {hi:.4g}] "
                            f"(8-sigma margin of the initial state)")

    if problems:
        return None, problems
    cfg = ExperimentConfig(mode=mode, legendre=sections["legendre"], potential=sections["potential"],
                           grid=sections["grid"], time=sections["time"], initial=sections["initial"],
                           **{k: v for k, v in scalars.items() if k != "mode"})
    return cfg, []


def parse_config(path, mode: str | None = None) -> ExperimentConfig:
    """Read and fully validate a JSON experiment config; all problems are reported together."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file {path} does not exist"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from None
    cfg, problems = _validate(raw, mode)
    if problems:
        raise ConfigError(problems)
    return cfg


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % (v + 0.0)  # + 0.0 folds -0.0 into 0


def write_csv(path: Path, header, rows) -> int:
    n = 0
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
            n += 1
    return n


def _initial_wave(cfg: ExperimentConfig, grid: Grid1D, hbar: float):
    init, pot = cfg.initial, cfg.pot
    if init["type"] == "gaussian":
        return init_gaussian_packet(grid, init["x0"], init["v0"], init["sigma"], hbar, pot.m)
    if init["type"] == "coherent":
        params = CoherentStateParams(init["x0"], init["v0"], pot.omega, pot.m, hbar)
        return init_coherent_state(grid, params)
    return init_plane_wave(grid, init["v0"], hbar, pot.m)


def _wave_snapshots(cfg: ExperimentConfig):
    t = cfg.time
    grid = cfg.grid1d
    n = int(round(t["t_end"] / t["dt"]))
    wf = _initial_wave(cfg, grid, cfg.hbar)
    return split_step_snapshots(wf, cfg.pot, t["dt"], n, every=t["output_every"])


def _snapshot_times(cfg, count):
    t = cfg.time
    n = int(round(t["t_end"] / t["dt"]))
    steps = list(range(0, n + 1, t["output_every"]))
    if steps[-1] != n:
        steps.append(n)
    assert len(steps) == count
    return np.array(steps) * t["dt"]


def _run_hopf_lax(cfg, out, manifest):
    grid, pot = cfg.grid1d, cfg.pot
    S0 = SampledFunction(grid, pot.m * cfg.initial["v0"] * grid.x)
    S = hopf_lax_solve(S0, pot, grid, cfg.output_times)
    v = velocity_field(S, pot).filled(np.nan)
    rows = ((t, x, s, vv, None) for k, t in enumerate(S.times)
            for x, s, vv in zip(grid.x, S.S[k], v[k]))
    return {"fields.csv": write_csv(out / "fields.csv", ["t", "x", "S", "v", "rho"], rows)}


def _run_schrodinger(cfg, out, manifest):
    snaps = _wave_snapshots(cfg)
    times = _snapshot_times(cfg, len(snaps))
    m = cfg.pot.m
    rows = []
    for t, wf in zip(times, snaps):
        f = madelung_decompose(wf)
        v = np.gradient(f.S, wf.grid.dx) / m
        rows.extend(zip([t] * wf.grid.n, wf.grid.x, f.S, v, f.rho))
    return {"fields.csv": write_csv(out / "fields.csv", ["t", "x", "S", "v", "rho"], rows)}


def _run_statistical_sweep(cfg, out, manifest, workers):
    init, m = cfg.initial, cfg.pot.m
    s, x0, v0 = init["sigma"], init["x0"], init["v0"]

    def rho0(x):
        return np.exp(-((x - x0) ** 2) / (2 * s**2)) / np.sqrt(2 * np.pi * s**2)

    def S0(x):
        return m * v0 * x

    r = statistical_sweep(rho0, S0, cfg.pot, cfg.grid1d, [cfg.time["t_end"]], cfg.hbars,
                          dt=cfg.time["dt"], n_particles=cfg.particles, seed=cfg.seed, workers=workers)
    rows = zip(r.hbars, r.err_S, r.err_rho, r.runtimes)
    return {"sweep.csv": write_csv(out / "sweep.csv", ["hbar", "err_S", "err_rho", "runtime_s"], rows)}


def _run_deterministic_sweep(cfg, out, manifest, workers):
    init, pot = cfg.initial, cfg.pot
    r = deterministic_sweep(init["x0"], init["v0"], pot.omega, cfg.time["t_end"], cfg.hbars,
                            cfg.grid1d, pot.m, dt=cfg.time["dt"], workers=workers)
    rows = zip(r.hbars, r.mean_err, r.var_ratio, r.runtimes)
    return {"sweep.csv": write_csv(out / "sweep.csv", ["hbar", "mean_err", "var_ratio", "runtime_s"], rows)}


def _run_bohm(cfg, out, manifest):
    snaps = _wave_snapshots(cfg)
    times = _snapshot_times(cfg, len(snaps))
    if not np.allclose(np.diff(times), times[1] - times[0]):
        raise ValueError("bohm mode needs t_end to be a multiple of dt * output_every")
    fields = [madelung_decompose(wf) for wf in snaps]
    ens = bohm_trajectories(fields, times, cfg.pot.m, cfg.particles, cfg.seed)
    rows = ((i, t, x) for i in range(ens.paths.shape[0]) for t, x in zip(times, ens.paths[i]))
    return {"trajectories.csv": write_csv(out / "trajectories.csv", ["particle_id", "t", "x"], rows)}


def _run_legendre(cfg, out, manifest):
    grid = cfg.grid1d
    lg = cfg.legendre
    values = 0.5 * grid.x**2 if lg["function"] == "quadratic" else np.abs(grid.x)
    p_grid = Grid1D(lg["p_min"], lg["p_max"], lg["n"])
    fs = legendre_fenchel(SampledFunction(grid, values), p_grid)
    rows = zip(p_grid.x, fs.values)
    return {"legendre.csv": write_csv(out / "legendre.csv", ["p", "f_star"], rows)}


_RUNNERS = {
    "hopf_lax": _run_hopf_lax,
    "schrodinger": _run_schrodinger,
    "statistical_sweep": _run_statistical_sweep,
    "deterministic_sweep": _run_deterministic_sweep,
    "bohm": _run_bohm,
    "legendre": _run_legendre,
}


def run(cfg: ExperimentConfig, workers: int | None = 1) -> RunManifest:
    """Execute the configured experiment; writes outputs, then ``manifest.json``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "manifest.json"
    if stale.exists():
        stale.unlink()
    manifest = RunManifest(config=asdict(cfg))
    start = time.perf_counter()
    runner = _RUNNERS[cfg.mode]
    if cfg.mode in ("statistical_sweep", "deterministic_sweep"):
        files = runner(cfg, out, manifest, workers)
    else:
        files = runner(cfg, out, manifest)
    manifest.stages[cfg.mode] = time.perf_counter() - start
    manifest.outputs = [{"file": name, "rows": rows} for name, rows in files.items()]
    (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    return manifest


def _build_parser():
    parser = argparse.ArgumentParser(prog="semiclassical", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES + ("validate",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--output", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides seed)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps, 0 = auto")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    mode = None if args.command == "validate" else args.command
    try:
        cfg = parse_config(args.config, mode)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.output is not None:
        cfg.output_dir = args.output
    if args.seed is not None:
        cfg.seed = args.seed
    if args.command == "validate":
        print(f"{args.config}: valid {cfg.mode} config")
        return EXIT_OK
    workers = None if args.threads == 0 else args.threads
    try:
        manifest = run(cfg, workers)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for item in manifest.outputs:
        print(f"wrote {Path(cfg.output_dir) / item['file']} ({item['rows']} rows)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
