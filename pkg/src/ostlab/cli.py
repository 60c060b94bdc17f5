"""Command-line entry point: every experiment behind one reproducible front.

Configuration is a flat ``key = value`` text file (``#`` comments allowed)
plus command-line flags; flags override the file, the file overrides
defaults.  Each subcommand accepts only its own documented keys and
rejects anything else with the offending file line.  Outputs are CSV/JSON
artifacts that embed the fully resolved configuration and the package
version; the wall-clock timestamp lives only in the sidecar
``<command>.meta.json`` so repeated runs with the same configuration are
byte-identical.

Exit codes: 0 success, 1 configuration or precondition error, 2 numerical
failure (integrator blow-up or degenerate importance weights).

The default output directory is the environment variable OSTLAB_OUTDIR
(falling back to the working directory); ``--out`` overrides it.
``--threads`` caps worker threads where a subcommand parallelizes over
independent work items; results do not depend on the thread count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bourgain import bilinear_sweep, kernel_integral_scan, kernel_sum_scan, resonance_scan
from .flow import BlowUpError, FlowParams, convergence_in_m, evolve, flow_map, picard_solve
from .gibbs import (
    DegenerateWeightsError,
    GibbsSpec,
    pcn_chain,
    sample_gaussian,
    save_ensemble,
)
from .invariance import (
    ball_indicator,
    cubic_integral,
    hamiltonian_observable,
    l2_squared,
    mode_power,
    recurrence_probe,
    run_invariance,
)
from .spectral import FourierField, make_grid, random_smooth_field

__all__ = ["main"]


class ConfigError(Exception):
    """Configuration problem: bad file, unknown key, malformed value."""


# ---------------------------------------------------------------------------
# typed configuration keys


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected true/false, got {text!r}")


def _parse_floats(text: str) -> tuple:
    items = [t for t in (p.strip() for p in text.split(",")) if t]
    if not items:
        raise ConfigError("expected a comma-separated list of numbers")
    return tuple(_parse_float(t) for t in items)


def _parse_ints(text: str) -> tuple:
    items = [t for t in (p.strip() for p in text.split(",")) if t]
    if not items:
        raise ConfigError("expected a comma-separated list of integers")
    return tuple(_parse_int(t) for t in items)


def _choice(*options: str):
    def parse(text: str) -> str:
        if text not in options:
            raise ConfigError(f"expected one of {', '.join(options)}; got {text!r}")
        return text

    return parse


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip decimal
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class _Key:
    name: str  # dotted config-file key
    flag: str  # --flag name
    parse: object
    default: object
    help: str

    @property
    def dest(self) -> str:
        return self.name.replace(".", "__")


def _key(name, flag, parse, default, help):
    return _Key(name=name, flag=flag, parse=parse, default=default, help=help)


_COMMON = [
    _key("output.dir", "out", str, "", "output directory ('' = $OSTLAB_OUTDIR or '.')"),
    _key("run.threads", "threads", _parse_int, 0, "max worker threads (0 = all cores)"),
]

_GRID = [
    _key("grid.length", "length", _parse_float, 2.0 * math.pi, "circle length A"),
    _key("grid.modes", "modes", _parse_int, 16, "retained positive Fourier modes m"),
    _key("grid.points", "points", _parse_int, 0, "quadrature points N (0 = 4m, alias-free)"),
]

_FLOW = [
    _key("flow.dt", "dt", _parse_float, 1e-3, "integrator time step"),
    _key(
        "flow.integrator",
        "integrator",
        _choice("etdrk4", "strang-split"),
        "etdrk4",
        "time integrator",
    ),
    _key("flow.dealias", "dealias", _parse_bool, True, "zero-padded products"),
    _key("flow.record_every", "record-every", _parse_int, 1, "steps between records"),
]

_INIT = [
    _key("init.kind", "init", _choice("gaussian-random", "cosine"), "gaussian-random", "initial data family"),
    _key("init.seed", "seed", _parse_int, 0, "random-state seed"),
    _key("init.k0", "k0", _parse_float, 2.0, "spectral decay scale of random data"),
    _key("init.norm", "norm", _parse_float, 1.0, "L2 norm (gaussian-random) or amplitude (cosine)"),
]

_GIBBS = [
    _key("gibbs.count", "count", _parse_int, 1000, "number of samples"),
    _key("gibbs.seed", "seed", _parse_int, 0, "master seed for sample streams"),
    _key("gibbs.cutoff_r", "cutoff", _parse_float, 0.0, "L2 cutoff radius R (0 = default 4x Gaussian RMS)"),
]

_OBSERVABLE_NAMES = "mode_power(k), cubic_integral, hamiltonian, ball_indicator, l2_squared"

_SUBCOMMAND_KEYS = {
    "simulate": _COMMON + _GRID + _FLOW + _INIT + [
        _key("flow.t", "t", _parse_float, 1.0, "final time T"),
    ],
    "gibbs-sample": _COMMON + _GRID[:2] + _GIBBS + [
        _key(
            "gibbs.sampler",
            "sampler",
            _choice("iid-importance", "pcn-mcmc"),
            "iid-importance",
            "sampling scheme",
        ),
        _key("gibbs.beta", "beta", _parse_float, 0.5, "pCN proposal step"),
        _key("gibbs.burn_in", "burn-in", _parse_int, 0, "pCN burn-in steps"),
    ],
    "verify-invariance": _COMMON + _GRID[:2] + _FLOW[:2] + _GIBBS + [
        _key("invariance.t_values", "t-values", _parse_floats, (0.5,), "flow times to test"),
        _key("invariance.z_max", "z-max", _parse_float, 3.0, "pass threshold on |z|"),
        _key(
            "invariance.observables",
            "observables",
            str,
            "mode_power(1),mode_power(2),mode_power(3),mode_power(4),cubic_integral,hamiltonian,ball_indicator",
            f"comma list from: {_OBSERVABLE_NAMES}",
        ),
    ],
    "resonance-scan": _COMMON + [
        _key("resonance.n_max", "nmax", _parse_int, 64, "exhaustive scan box |n| <= n_max"),
    ],
    "bilinear-sweep": _COMMON + [
        _key("bilinear.s_values", "s", _parse_floats, (0.0, -0.5, -0.6), "Sobolev indices"),
        _key("bilinear.n_max_values", "nmax", _parse_ints, (16, 32, 64), "lattice sizes"),
        _key("bilinear.trials", "trials", _parse_int, 4, "random candidates per structured pair"),
        _key("bilinear.d_tau", "d-tau", _parse_float, 16.0, "modulation grid spacing (shared)"),
        _key("bilinear.w_cells", "w-cells", _parse_int, 16, "candidate profile width in cells"),
        _key("bilinear.seed", "seed", _parse_int, 0, "seed for random profiles"),
    ],
    "kernel-scan": _COMMON + [
        _key(
            "kernel.alpha_values",
            "alpha",
            _parse_floats,
            (0.0, 1.0, -1.0, 10.0, -10.0, 1e3, -1e3, 1e6, -1e6),
            "integral scan arguments",
        ),
        _key("kernel.rho", "rho", _parse_float, 0.5, "form-2 exponent, in (0,1)"),
        _key("kernel.eps", "eps", _parse_float, 0.5, "form-3 exponent offset, > 0"),
        _key("kernel.sum_tau_values", "sum-tau", _parse_floats, (0.0, 5.0, -25.0, 300.0), "sum scan tau grid"),
        _key("kernel.sum_n_values", "sum-n", _parse_ints, (1, 2, -3, 7), "sum scan frequency grid"),
        _key("kernel.sum_rho", "sum-rho", _parse_float, 0.7, "form-3 sum exponent, > 2/3"),
        _key("kernel.k_range", "k-range", _parse_int, 100000, "explicit summation range"),
    ],
    "picard": _COMMON + _GRID + _INIT[1:] + [
        _key("picard.t", "t", _parse_float, 0.1, "contraction interval length T"),
        _key("picard.iters", "iters", _parse_int, 8, "Picard iterations"),
        _key("picard.nodes", "nodes", _parse_int, 0, "quadrature nodes (0 = auto)"),
        _key("picard.ref_dt", "ref-dt", _parse_float, 1e-4, "time step of the reference endpoint"),
    ],
    "convergence-m": _COMMON + [
        _key("grid.length", "length", _parse_float, 2.0 * math.pi, "circle length A"),
        _key("convergence.m_values", "m", _parse_ints, (8, 16, 32), "truncation sizes (increasing)"),
        _key("convergence.t", "t", _parse_float, 1.0, "final time T"),
        _key("flow.dt", "dt", _parse_float, 1e-3, "integrator time step"),
        _key("flow.record_every", "record-every", _parse_int, 50, "steps between compared records"),
        _key("init.seed", "seed", _parse_int, 0, "random-state seed"),
        _key("init.k0", "k0", _parse_float, 4.0, "spectral decay scale of random data"),
        _key("init.norm", "norm", _parse_float, 1.0, "L2 norm of the initial state"),
    ],
    "recurrence": _COMMON + _GRID[:2] + _FLOW[0:1] + _FLOW[3:4] + _GIBBS + [
        _key("recurrence.horizon", "horizon", _parse_float, 15.0, "probe horizon"),
        _key("recurrence.radius", "radius", _parse_float, 0.35, "L2 return radius"),
    ],
}

_DESCRIPTIONS = {
    "simulate": "integrate one initial state and record conserved quantities",
    "gibbs-sample": "draw a Gibbs ensemble and save it with a moment summary",
    "verify-invariance": "push a Gibbs ensemble through the flow and z-test observables",
    "resonance-scan": "exhaustive minimum of |R(n,n1)|/|n n1 (n-n1)|",
    "bilinear-sweep": "adversarial bilinear-estimate ratios across lattice sizes",
    "kernel-scan": "quadrature and frequency-sum checks of the kernel bounds",
    "picard": "Picard iteration contraction against the time-stepper endpoint",
    "convergence-m": "truncation convergence against a finer reference",
    "recurrence": "return-time statistics of Gibbs samples under the flow",
}


# ---------------------------------------------------------------------------
# config resolution


def _parse_config_file(path: str, keys: dict) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        name, text = (part.strip() for part in line.split("=", 1))
        if name not in keys:
            raise ConfigError(f"{path}:{lineno}: unknown key '{name}'")
        try:
            out[name] = keys[name].parse(text)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: key '{name}': {exc}") from exc
    return out


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration: defaults, then file, then flags."""

    command: str
    values: dict

    def __getitem__(self, name):
        return self.values[name]

    def echo(self) -> dict:
        """Canonical string form of every key, as embedded in outputs."""
        return {name: _fmt(v) for name, v in sorted(self.values.items())}


def _resolve(command: str, args: argparse.Namespace) -> RunConfig:
    keys = {k.name: k for k in _SUBCOMMAND_KEYS[command]}
    values = {k.name: k.default for k in keys.values()}
    if args.config is not None:
        values.update(_parse_config_file(args.config, keys))
    for k in keys.values():
        text = getattr(args, k.dest, None)
        if text is not None:
            try:
                values[k.name] = k.parse(text)
            except ConfigError as exc:
                raise ConfigError(f"--{k.flag}: {exc}") from exc
    return RunConfig(command=command, values=values)


def _out_dir(cfg: RunConfig) -> Path:
    configured = cfg["output.dir"]
    base = configured or os.environ.get("OSTLAB_OUTDIR", "") or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if len(items) <= 1:
        return [fn(x) for x in items]
    workers = threads if threads > 0 else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # map preserves input order


# ---------------------------------------------------------------------------
# artifact writers


def _config_comment_lines(cfg: RunConfig):
    yield f"# version = {__version__}"
    yield f"# command = {cfg.command}"
    for name, value in cfg.echo().items():
        yield f"# {name} = {value}"


def _write_csv(path: Path, cfg: RunConfig, header, rows) -> None:
    lines = list(_config_comment_lines(cfg))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")


def _write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    doc = {"version": __version__, "command": cfg.command, "config": cfg.echo()}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


def _write_meta(out: Path, cfg: RunConfig, summary: dict) -> None:
    # the only artifact carrying a timestamp, so data files stay reproducible
    doc = {
        "version": __version__,
        "command": cfg.command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": cfg.echo(),
        "summary": summary,
    }
    path = out / f"{cfg.command}.meta.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# shared construction helpers


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


def _make_grid_from(cfg: RunConfig):
    points = cfg.values.get("grid.points", 0)
    return make_grid(cfg["grid.modes"], cfg["grid.length"], points if points else None)


def _initial_field(cfg: RunConfig, grid):
    if cfg["init.kind"] == "cosine":
        coeff = np.zeros(grid.modes, dtype=np.complex128)
        coeff[0] = 0.5 * cfg["init.norm"]
        return FourierField(grid, coeff)
    rng = _rng(cfg["init.seed"])
    return random_smooth_field(grid, rng, k0=cfg["init.k0"], norm=cfg["init.norm"])


def _gibbs_spec(cfg: RunConfig, grid) -> GibbsSpec:
    cutoff = cfg["gibbs.cutoff_r"]
    return GibbsSpec(grid, cutoff_R=(cutoff if cutoff > 0.0 else None), seed=cfg["gibbs.seed"])


_OBS_MODE = re.compile(r"^mode_power\((\d+)\)$")


def _build_observables(text: str, spec: GibbsSpec):
    from .gibbs import default_cutoff

    grid = spec.grid
    radius = spec.cutoff_R if spec.cutoff_R is not None else default_cutoff(grid)
    obs = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        m = _OBS_MODE.match(token)
        if m:
            k = int(m.group(1))
            if k > grid.modes:
                raise ConfigError(f"mode_power({k}) exceeds grid.modes = {grid.modes}")
            obs.append(mode_power(k))
        elif token == "cubic_integral":
            obs.append(cubic_integral())
        elif token == "hamiltonian":
            obs.append(hamiltonian_observable())
        elif token == "ball_indicator":
            obs.append(ball_indicator(radius))
        elif token == "l2_squared":
            obs.append(l2_squared())
        else:
            raise ConfigError(f"unknown observable {token!r}; choose from {_OBSERVABLE_NAMES}")
    if not obs:
        raise ConfigError("need at least one observable")
    return obs


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_simulate(cfg: RunConfig) -> int:
    grid = _make_grid_from(cfg)
    f0 = _initial_field(cfg, grid)
    p = FlowParams(
        dt=cfg["flow.dt"],
        T=cfg["flow.t"],
        integrator=cfg["flow.integrator"],
        dealias=cfg["flow.dealias"],
        record_every=cfg["flow.record_every"],
    )
    rec = evolve(f0, p)
    out = _out_dir(cfg)
    rows = [(t, l2, h) for t, l2, h in zip(rec.times, rec.l2, rec.hamiltonian)]
    _write_csv(out / "simulate.csv", cfg, ["t", "l2", "hamiltonian"], rows)
    final_rows = [
        (k, float(c.real), float(c.imag)) for k, c in enumerate(rec.final.coeff, start=1)
    ]
    _write_csv(out / "final_state.csv", cfg, ["k", "re", "im"], final_rows)
    l2_drift = float(np.max(np.abs(rec.l2 - rec.l2[0]))) / rec.l2[0]
    h_drift = float(np.max(np.abs(rec.hamiltonian - rec.hamiltonian[0])))
    _write_meta(out, cfg, {"l2_relative_drift": l2_drift, "hamiltonian_drift": h_drift})
    print(f"relative L2 drift {l2_drift:.3e} over T = {cfg['flow.t']}")
    return 0


def _cmd_gibbs_sample(cfg: RunConfig) -> int:
    grid = make_grid(cfg["grid.modes"], cfg["grid.length"])
    spec = _gibbs_spec(cfg, grid)
    if cfg["gibbs.sampler"] == "pcn-mcmc":
        ens = pcn_chain(spec, cfg["gibbs.count"], cfg["gibbs.beta"], burn_in=cfg["gibbs.burn_in"])
    else:
        ens = sample_gaussian(spec, cfg["gibbs.count"])
    out = _out_dir(cfg)
    save_ensemble(ens, out / "ensemble")
    print(f"wrote {out / 'ensemble'}")
    # per-coordinate variance check against the 1/v_j ladder
    scale = math.sqrt(2.0 * grid.length)
    coords = np.empty((len(ens), 2 * grid.modes))
    coords[:, 0::2] = -scale * ens.coeffs.imag
    coords[:, 1::2] = scale * ens.coeffs.real
    v = np.repeat(spec.v, 2)
    var = coords.var(axis=0)
    rows = [(j + 1, v[j], var[j], var[j] * v[j]) for j in range(2 * grid.modes)]
    _write_csv(out / "gibbs_summary.csv", cfg, ["coordinate", "v", "variance", "variance_times_v"], rows)
    summary = {"max_abs_variance_times_v_minus_1": float(np.max(np.abs(var * v - 1.0)))}
    if ens.acceptance_rate is not None:
        summary["acceptance_rate"] = ens.acceptance_rate
    _write_meta(out, cfg, summary)
    print(f"max |variance * v - 1| = {summary['max_abs_variance_times_v_minus_1']:.4f}")
    return 0


def _cmd_verify_invariance(cfg: RunConfig) -> int:
    grid = make_grid(cfg["grid.modes"], cfg["grid.length"])
    spec = _gibbs_spec(cfg, grid)
    obs = _build_observables(cfg["invariance.observables"], spec)
    p = FlowParams(dt=cfg["flow.dt"], integrator=cfg["flow.integrator"])
    count, z_max = cfg["gibbs.count"], cfg["invariance.z_max"]

    def one(t):
        return run_invariance(spec, p, t, obs, count, z_max=z_max)

    reports = _parallel_map(one, cfg["invariance.t_values"], cfg["run.threads"])
    out = _out_dir(cfg)
    _write_json(out / "invariance.json", cfg, {"reports": [r.to_json() for r in reports]})
    worst = 0.0
    ok = True
    for rep in reports:
        flag = "PASS" if rep.all_passed else "FAIL"
        zmax_seen = max((abs(row.z) for row in rep.rows), default=0.0)
        worst = max(worst, zmax_seen)
        ok = ok and rep.all_passed
        print(f"t = {rep.t}: max |z| = {zmax_seen:.3f} [{flag}]")
    _write_meta(out, cfg, {"max_abs_z": worst, "all_passed": ok})
    return 0


def _cmd_resonance_scan(cfg: RunConfig) -> int:
    scan = resonance_scan(cfg["resonance.n_max"])
    out = _out_dir(cfg)
    rows = [
        ("admissible-min", scan.minimum.n, scan.minimum.n1, scan.minimum.R, scan.minimum.ratio),
        (
            "unit-slice-min",
            scan.slice_minimum.n,
            scan.slice_minimum.n1,
            scan.slice_minimum.R,
            scan.slice_minimum.ratio,
        ),
    ]
    _write_csv(out / "resonance_scan.csv", cfg, ["kind", "n", "n1", "R", "ratio"], rows)
    hist_rows = [
        (scan.hist_edges[i], scan.hist_edges[i + 1], int(scan.hist_counts[i]))
        for i in range(len(scan.hist_counts))
    ]
    _write_csv(out / "resonance_hist.csv", cfg, ["ratio_lo", "ratio_hi", "count"], hist_rows)
    _write_meta(out, cfg, {"min_ratio": scan.minimum.ratio})
    print(
        f"min ratio {scan.minimum.ratio:.9f} at (n, n1) = "
        f"({scan.minimum.n}, {scan.minimum.n1})"
    )
    return 0


def _cmd_bilinear_sweep(cfg: RunConfig) -> int:
    s_values = cfg["bilinear.s_values"]
    trials, d_tau = cfg["bilinear.trials"], cfg["bilinear.d_tau"]
    w_cells, seed = cfg["bilinear.w_cells"], cfg["bilinear.seed"]

    def one(n_max):
        return bilinear_sweep([*s_values], [n_max], trials, d_tau=d_tau, w_cells=w_cells, seed=seed)

    results = _parallel_map(one, cfg["bilinear.n_max_values"], cfg["run.threads"])
    rows = sorted(
        ((row.s, row.n_max, row.max_ratio, row.candidate, row.recommendation_met)
         for res in results for row in res.rows),
        key=lambda r: (r[0], r[1]),
    )
    out = _out_dir(cfg)
    _write_csv(
        out / "bilinear_sweep.csv",
        cfg,
        ["s", "n_max", "max_ratio", "candidate", "recommendation_met"],
        rows,
    )
    _write_meta(out, cfg, {"rows": len(rows)})
    for s in s_values:
        ratios = [r[2] for r in rows if r[0] == s]
        print(f"s = {s}: max ratios {', '.join(f'{v:.6f}' for v in ratios)}")
    return 0


def _cmd_kernel_scan(cfg: RunConfig) -> int:
    integrals = kernel_integral_scan(
        cfg["kernel.alpha_values"], rho=cfg["kernel.rho"], eps=cfg["kernel.eps"]
    )
    sums = kernel_sum_scan(
        cfg["kernel.sum_tau_values"],
        cfg["kernel.sum_n_values"],
        rho=cfg["kernel.sum_rho"],
        k_range=cfg["kernel.k_range"],
    )
    out = _out_dir(cfg)
    _write_csv(
        out / "kernel_integrals.csv",
        cfg,
        ["form", "alpha", "integral", "bound", "ratio"],
        [(r.form, r.alpha, r.integral, r.bound, r.ratio) for r in integrals.rows],
    )
    _write_csv(
        out / "kernel_sums.csv",
        cfg,
        ["form", "tau", "n", "value", "tail"],
        [(r.form, r.tau, r.n, r.value, r.tail) for r in sums.rows],
    )
    constant = max(integrals.max_ratio, sums.max_value)
    _write_meta(
        out,
        cfg,
        {
            "max_integral_ratio": integrals.max_ratio,
            "max_sum_value": sums.max_value,
            "single_constant": constant,
        },
    )
    print(f"single bounding constant {constant:.4f} (integrals {integrals.max_ratio:.4f}, sums {sums.max_value:.4f})")
    return 0


def _cmd_picard(cfg: RunConfig) -> int:
    grid = _make_grid_from(cfg)
    rng = _rng(cfg["init.seed"])
    phi = random_smooth_field(grid, rng, k0=cfg["init.k0"], norm=cfg["init.norm"])
    nodes = cfg["picard.nodes"]
    res = picard_solve(phi, cfg["picard.t"], cfg["picard.iters"], nodes=(nodes if nodes else None))
    end = flow_map(phi, cfg["picard.t"], FlowParams(dt=cfg["picard.ref_dt"]))
    endpoint_error = float(
        np.sqrt(2.0 * grid.length * np.sum(np.abs(res.final.coeff - end.coeff) ** 2))
    )
    out = _out_dir(cfg)
    rows = [(i + 1, d) for i, d in enumerate(res.distances)]
    _write_csv(out / "picard.csv", cfg, ["iteration", "distance"], rows)
    _write_meta(out, cfg, {"diverged": res.diverged, "endpoint_error": endpoint_error})
    state = "diverged" if res.diverged else "contracting"
    print(f"{state}; endpoint error vs reference integrator {endpoint_error:.3e}")
    return 0


def _cmd_convergence_m(cfg: RunConfig) -> int:
    m_values = cfg["convergence.m_values"]
    grid = make_grid(2 * max(m_values), cfg["grid.length"])
    rng = _rng(cfg["init.seed"])
    f0 = random_smooth_field(grid, rng, k0=cfg["init.k0"], norm=cfg["init.norm"])
    study = convergence_in_m(
        f0,
        cfg["convergence.t"],
        list(m_values),
        dt=cfg["flow.dt"],
        record_every=cfg["flow.record_every"],
    )
    out = _out_dir(cfg)
    rows = list(zip(study.m_values, study.errors))
    _write_csv(out / "convergence_m.csv", cfg, ["m", "sup_l2_error"], rows)
    decreasing = all(b < a for a, b in zip(study.errors, study.errors[1:]))
    _write_meta(
        out,
        cfg,
        {"reference_modes": study.reference_modes, "strictly_decreasing": decreasing},
    )
    for m, err in rows:
        print(f"m = {m:3d}: sup L2 error {err:.6e}")
    print(f"strictly decreasing: {'yes' if decreasing else 'no'}")
    return 0


def _cmd_recurrence(cfg: RunConfig) -> int:
    grid = make_grid(cfg["grid.modes"], cfg["grid.length"])
    spec = _gibbs_spec(cfg, grid)
    p = FlowParams(dt=cfg["flow.dt"], record_every=cfg["flow.record_every"])
    stats = recurrence_probe(
        spec, p, cfg["gibbs.count"], cfg["recurrence.horizon"], cfg["recurrence.radius"]
    )
    out = _out_dir(cfg)
    rows = [(i, t) for i, t in enumerate(stats.return_times)]
    _write_csv(out / "recurrence.csv", cfg, ["sample", "return_time"], rows)
    _write_meta(
        out,
        cfg,
        {
            "returned_fraction": stats.returned_fraction,
            "t_min": stats.t_min,
        },
    )
    print(f"returned fraction {stats.returned_fraction:.3f} within horizon {stats.horizon}")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "gibbs-sample": _cmd_gibbs_sample,
    "verify-invariance": _cmd_verify_invariance,
    "resonance-scan": _cmd_resonance_scan,
    "bilinear-sweep": _cmd_bilinear_sweep,
    "kernel-scan": _cmd_kernel_scan,
    "picard": _cmd_picard,
    "convergence-m": _cmd_convergence_m,
    "recurrence": _cmd_recurrence,
}


# ---------------------------------------------------------------------------
# parser and entry point


class _Parser(argparse.ArgumentParser):
    # precondition problems exit 1 (argparse's default usage-error code is 2,
    # which this tool reserves for numerical failures)
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ostlab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"ostlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for command, keys in _SUBCOMMAND_KEYS.items():
        p = sub.add_parser(command, help=_DESCRIPTIONS[command], description=_DESCRIPTIONS[command])
        p.add_argument("--config", default=None, metavar="FILE", help="key = value configuration file")
        for k in keys:
            p.add_argument(
                f"--{k.flag}",
                dest=k.dest,
                default=None,
                metavar="V",
                help=f"{k.help} [default: {_fmt(k.default)}; key: {k.name}]",
            )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        cfg = _resolve(args.command, args)
        return _HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BlowUpError, DegenerateWeightsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
