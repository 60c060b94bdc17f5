"""Measure-invariance experiments: push an ensemble through the flow.

The central identity under test: for the Gibbs measure mu built in
`gibbs` and the flow of `flow`, E_mu[F] = E_mu[F o flow_map(., t)] for
every observable F and every time t.  The experiment draws a weighted
ensemble representing mu, evolves every sample field by t, and compares
the weighted estimate of each observable before and after — with the
ORIGINAL weights kept on the evolved samples.  That is the pushforward
reading of invariance: if the flow preserves mu, the pushed ensemble
with unchanged weights still represents mu.  Recomputing weights after
the flow would instead test a change-of-variables identity and would
pass vacuously.

The z-score per observable is (mean_after - mean_before) divided by the
combined standard error; |z| <= 3 is the (loose, per-observable) pass
gate.  For multi-observable runs the report carries a note that no
multiple-comparison correction is applied — raw z-scores are the data.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .flow import FlowParams, _advance, _flow_map_batch
from .gibbs import (
    DegenerateWeightsError,
    ESS_FLOOR,
    Ensemble,
    GibbsSpec,
    gaussian_rms_l2,
    gibbs_expectation,
    sample_gaussian,
)
from .spectral import (
    GridSpec,
    _cubic_g,
    _hamiltonian,
    _l2,
    make_grid,
)

__all__ = [
    "InvarianceReport",
    "InvarianceRow",
    "Observable",
    "RecurrenceStats",
    "SweepResult",
    "ball_indicator",
    "cubic_integral",
    "cylinder_indicator",
    "hamiltonian_observable",
    "hs_norm",
    "invariance_sweep",
    "l2_squared",
    "mode_power",
    "recurrence_probe",
    "run_invariance",
]


@dataclass(frozen=True, eq=False)
class Observable:
    """Named functional of a field, with a vectorized evaluator.

    bounded marks indicator-type observables (values in [0,1]); moment
    observables are unbounded and rely on the sampling cutoff for finite
    variance.
    """

    name: str
    kind: str
    bounded: bool
    _batch: callable

    def batch(self, coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
        return self._batch(coeffs, grid)

    def __call__(self, f) -> float:
        return float(self._batch(f.coeff[None, :], f.grid)[0])


def l2_squared() -> Observable:
    def batch(c, grid):
        return 2.0 * grid.length * np.sum(np.abs(c) ** 2, axis=-1)

    return Observable("l2_squared", "l2_squared", False, batch)


def hs_norm(s: float) -> Observable:
    def batch(c, grid):
        w = (1.0 + grid.xi**2) ** s
        return np.sqrt(2.0 * grid.length * np.sum(w * np.abs(c) ** 2, axis=-1))

    return Observable(f"hs_norm({s:g})", "hs_norm", False, batch)


def mode_power(k: int) -> Observable:
    """Energy 2A|u_hat(k)|^2 carried by mode k (= a_{2k-1}^2 + a_{2k}^2)."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)

    def batch(c, grid):
        if k > grid.modes:
            raise ValueError(f"mode_power({k}) needs modes >= {k}, grid has {grid.modes}")
        return 2.0 * grid.length * np.abs(c[..., k - 1]) ** 2

    return Observable(f"mode_power({k})", "mode_power", False, batch)


def cubic_integral() -> Observable:
    def batch(c, grid):
        return 3.0 * _cubic_g(c, grid)

    return Observable("cubic_integral", "cubic_integral", False, batch)


def hamiltonian_observable() -> Observable:
    def batch(c, grid):
        return _hamiltonian(c, grid)

    return Observable("hamiltonian", "hamiltonian", False, batch)


def cylinder_indicator(j: int, lo: float, hi: float) -> Observable:
    """1{lo <= a_j <= hi} on the j-th interleaved sine/cosine coordinate."""
    if int(j) != j or j < 1:
        raise ValueError(f"j must be a positive integer, got {j}")
    j = int(j)

    def batch(c, grid):
        if j > 2 * grid.modes:
            raise ValueError(f"coordinate {j} exceeds the {2 * grid.modes} available")
        k = (j - 1) // 2
        root = math.sqrt(2.0 * grid.length)
        a = -root * c[..., k].imag if (j - 1) % 2 == 0 else root * c[..., k].real
        return ((a >= lo) & (a <= hi)).astype(np.float64)

    return Observable(f"cylinder_indicator({j},[{lo:g},{hi:g}])", "cylinder_indicator", True, batch)


def ball_indicator(R: float) -> Observable:
    if not (R > 0.0 and math.isfinite(R)):
        raise ValueError(f"R must be positive and finite, got {R}")

    def batch(c, grid):
        return (_l2(c, grid.length) <= R).astype(np.float64)

    return Observable(f"ball_indicator({R:g})", "ball_indicator", True, batch)


# ---------------------------------------------------------------------------
# the invariance experiment


@dataclass(frozen=True)
class InvarianceRow:
    name: str
    mean_before: float
    se_before: float
    mean_after: float
    se_after: float
    z: float
    passed: bool


@dataclass(frozen=True)
class InvarianceReport:
    m: int
    t: float
    count: int
    seed: int
    ess: float
    rows: tuple
    z_max: float
    note: str | None = None

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_json(self) -> dict:
        out = {
            "meta": {
                "m": self.m,
                "t": self.t,
                "count": self.count,
                "seed": self.seed,
                "ess": self.ess,
            },
            "results": [
                {
                    "name": r.name,
                    "mean_before": r.mean_before,
                    "se_before": r.se_before,
                    "mean_after": r.mean_after,
                    "se_after": r.se_after,
                    "z": r.z,
                    "pass": r.passed,
                }
                for r in self.rows
            ],
        }
        if self.note is not None:
            out["note"] = self.note
        return out


def _z_score(before, after) -> float:
    diff = after.mean - before.mean
    if diff == 0.0:
        return 0.0
    denom = math.hypot(before.std_error, after.std_error)
    return diff / denom if denom > 0.0 else math.inf


def _ensemble_ess(ens: Ensemble) -> float:
    w = np.exp(ens.log_weights - np.max(ens.log_weights)) * ens.in_support
    total = math.fsum(w)
    if total == 0.0:
        return 0.0
    return total**2 / math.fsum(w * w)


def run_invariance(
    spec: GibbsSpec,
    p: FlowParams,
    t: float,
    obs,
    count: int,
    z_max: float = 3.0,
) -> InvarianceReport:
    """Compare E[F] over a mu-ensemble before and after flowing by t.

    Weights are those of the initial ensemble throughout (pushforward
    semantics).  Raises DegenerateWeightsError when the effective sample
    size is below the floor, and propagates integrator blow-ups (which
    carry the offending sample indices).
    """
    obs = list(obs)
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    if not obs:
        raise ValueError("need at least one observable")
    ens = sample_gaussian(spec, int(count))
    ess = _ensemble_ess(ens)
    if ess < ESS_FLOOR:
        raise DegenerateWeightsError(
            f"effective sample size {ess:.2f} below {ESS_FLOOR}; "
            "increase count or tighten the cutoff"
        )
    pushed_coeffs = _flow_map_batch(ens.coeffs, spec.grid, t, p)
    pushed = dataclasses.replace(ens, coeffs=pushed_coeffs)
    rows = []
    for F in obs:
        before = gibbs_expectation(ens, F)
        after = gibbs_expectation(pushed, F)
        z = _z_score(before, after)
        rows.append(
            InvarianceRow(
                name=F.name,
                mean_before=before.mean,
                se_before=before.std_error,
                mean_after=after.mean,
                se_after=after.std_error,
                z=z,
                passed=abs(z) <= z_max,
            )
        )
    note = (
        f"{len(obs)} observables tested at per-observable gate |z| <= {z_max:g}; "
        "no multiple-comparison correction applied"
        if len(obs) > 1
        else None
    )
    return InvarianceReport(
        m=spec.grid.modes,
        t=float(t),
        count=int(count),
        seed=spec.seed,
        ess=ess,
        rows=tuple(rows),
        z_max=float(z_max),
        note=note,
    )


# ---------------------------------------------------------------------------
# sweeps over truncation level and time


@dataclass(frozen=True)
class SweepResult:
    """Grid of invariance reports plus per-m observable moments at t=0.

    moments[i] maps observable name -> (mean, se) under mu_m for
    m = m_values[i]; their stabilization in m is the empirical stand-in
    for convergence of the truncated measures.
    """

    m_values: tuple
    t_values: tuple
    reports: tuple  # reports[i][j] for (m_values[i], t_values[j])
    moments: tuple

    def report(self, m: int, t: float) -> InvarianceReport:
        return self.reports[self.m_values.index(m)][self.t_values.index(t)]

    def moment_table(self, name: str):
        """[(m, mean, se)] rows for one observable across the m sweep."""
        return [
            (m, *self.moments[i][name]) for i, m in enumerate(self.m_values)
        ]


def invariance_sweep(
    m_list,
    t_list,
    count: int,
    obs,
    dt: float = 1e-3,
    length: float = 2.0 * math.pi,
    seed: int = 0,
    cutoff_factor: float = 4.0,
    z_max: float = 3.0,
) -> SweepResult:
    """run_invariance over an (m, t) grid with per-m Gibbs specs.

    Each m gets cutoff R = cutoff_factor x its Gaussian rms L2 norm.
    Observables must make sense on every grid in the sweep (e.g.
    mode_power(k) needs k <= min(m_list)).
    """
    m_list = [int(m) for m in m_list]
    t_list = [float(t) for t in t_list]
    obs = list(obs)
    if not m_list or not t_list:
        raise ValueError("m_list and t_list must be nonempty")
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    reports = []
    moments = []
    for m in m_list:
        grid = make_grid(m, length=length)
        spec = GibbsSpec(grid=grid, cutoff_R=cutoff_factor * gaussian_rms_l2(grid), seed=seed)
        p = FlowParams(dt=dt)
        row = tuple(run_invariance(spec, p, t, obs, count, z_max=z_max) for t in t_list)
        reports.append(row)
        ens = sample_gaussian(spec, int(count))
        table = {}
        for F in obs:
            est = gibbs_expectation(ens, F)
            table[F.name] = (est.mean, est.std_error)
        moments.append(table)
    return SweepResult(
        m_values=tuple(m_list),
        t_values=tuple(t_list),
        reports=tuple(reports),
        moments=tuple(moments),
    )


# ---------------------------------------------------------------------------
# recurrence demonstration


@dataclass(frozen=True)
class RecurrenceStats:
    """First return times to an L2 ball around each initial state.

    return_times[i] is the first probed time t >= t_min with
    |u_i(t) - u_i(0)| < radius, or NaN if none occurred within the
    horizon.  Probes happen every record_every steps, so t_min =
    record_every * dt.
    """

    return_times: np.ndarray
    horizon: float
    radius: float
    t_min: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray

    def __post_init__(self):
        for name in ("return_times", "hist_counts", "hist_edges"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def returned_fraction(self) -> float:
        return float(np.mean(np.isfinite(self.return_times)))


def recurrence_probe(
    spec: GibbsSpec,
    p: FlowParams,
    sample_count: int,
    horizon: float,
    radius: float,
) -> RecurrenceStats:
    """Measure-preserving flows revisit: probe return times per sample.

    A demonstration, not a theorem check — the summary histogram has no
    pass/fail attached.  radius = 0 trivially reports no returns.
    """
    if radius < 0.0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if int(sample_count) != sample_count or sample_count < 1:
        raise ValueError(f"sample_count must be a positive integer, got {sample_count}")
    grid = spec.grid
    t_min = p.record_every * p.dt
    ens = sample_gaussian(spec, int(sample_count))
    start = ens.coeffs.copy()
    return_steps = np.full(len(ens), -1, dtype=np.int64)

    if radius > 0.0:

        def on_step(i, t, c):
            if i % p.record_every:
                return False
            dist = _l2(c - start, grid.length)
            fresh = (return_steps < 0) & (dist < radius)
            return_steps[fresh] = i
            return bool(np.all(return_steps >= 0))

        _advance(start, grid, p, horizon, on_step)

    times = np.where(return_steps > 0, return_steps * p.dt, math.nan)
    finite = times[np.isfinite(times)]
    counts, edges = np.histogram(finite, bins=10, range=(t_min, max(horizon, t_min * 1.0000001)))
    return RecurrenceStats(
        return_times=times,
        horizon=float(horizon),
        radius=float(radius),
        t_min=t_min,
        hist_counts=counts,
        hist_edges=edges,
    )
