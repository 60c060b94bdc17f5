"""Gaussian and Gibbs measures on the truncated field space.

The reference measure w is the centered Gaussian whose coordinate
variances are 1/v_j, where v interleaves the eigenvalues v_k = xi_k^2 +
xi_k^{-2} of the quadratic-energy operator S (each appearing twice, for
the sine and cosine directions).  Since sum_k 2/v_k < infinity (trace
class), w has almost-surely-L2 samples; `trace_check` verifies the
summability numerically.

The Gibbs measure reweights w by exp(-g(u)), g(u) = (1/3) int u^3 — the
cubic part of the conserved Hamiltonian.  Because int u^3 is unbounded
below on the support of w, expectations are taken with an optional hard
L2-ball cutoff |u| <= R (default 4x the Gaussian root-mean L2 norm, cf.
`default_cutoff`); the cutoff indicator is itself conserved by the flow,
so it does not disturb invariance experiments.

Two samplers are provided: iid importance sampling from w with weights
exp(-g), and a preconditioned Crank-Nicolson chain whose proposal
preserves w exactly so that acceptance involves only g.  Both are
deterministic given (spec, seed): sample i uses a counter-based stream
keyed by (seed, i), so ensembles are reproducible under any degree of
parallelism and estimates are invariant under sample permutation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .spectral import (
    FourierField,
    GridSpec,
    TWO_PI,
    _coords_to_coeff,
    _cubic_g,
    _l2,
    cubic_g,
    energy_eigenvalues,
    l2_norm,
    load_field,
    save_field,
)

ENSEMBLE_FORMAT = "ostlab-ensemble-v1"

ESS_FLOOR = 10.0

_PCN_STREAM = 2**63 + 1  # chain stream index, disjoint from sample indices

__all__ = [
    "ENSEMBLE_FORMAT",
    "ESS_FLOOR",
    "DegenerateWeightsError",
    "Ensemble",
    "GibbsEstimate",
    "GibbsSpec",
    "WeightedSample",
    "cylinder_probability",
    "default_cutoff",
    "eigenvalues",
    "gaussian_rms_l2",
    "gibbs_expectation",
    "load_ensemble",
    "pcn_chain",
    "pcn_step",
    "sample_gaussian",
    "save_ensemble",
    "trace_check",
]


class DegenerateWeightsError(RuntimeError):
    """Importance weights collapsed: effective sample size below the floor."""


def eigenvalues(grid: GridSpec) -> np.ndarray:
    """v_k = xi_k^2 + xi_k^{-2}, k = 1..m; the inverse coordinate variances."""
    return energy_eigenvalues(grid)


def _interleaved(grid: GridSpec) -> np.ndarray:
    """v repeated per real coordinate: [v_1, v_1, v_2, v_2, ...]."""
    return np.repeat(energy_eigenvalues(grid), 2)


def gaussian_rms_l2(grid: GridSpec) -> float:
    """sqrt(E_w |u|_{L2}^2) = sqrt(sum_k 2/v_k)."""
    return math.sqrt(float(np.sum(2.0 / energy_eigenvalues(grid))))


def default_cutoff(grid: GridSpec) -> float:
    """Ball radius 4x the Gaussian root-mean L2 norm: generous but finite."""
    return 4.0 * gaussian_rms_l2(grid)


def trace_check(grid: GridSpec, k_max: int) -> float:
    """Partial sum sum_{k=1}^{k_max} 2/v_k of the covariance trace.

    Extends the grid's eigenvalue ladder beyond mode m with the same
    length; summed in chunks with pairwise accuracy.  Monotone in k_max
    and Cauchy (tail bounded by sum 2/xi_k^2), which is the trace-class
    property making the Gaussian measure countably additive.
    """
    if int(k_max) != k_max or k_max < grid.modes:
        raise ValueError(f"k_max must be an integer >= modes = {grid.modes}")
    k_max = int(k_max)
    total = 0.0
    chunk = 1_000_000
    for start in range(1, k_max + 1, chunk):
        k = np.arange(start, min(start + chunk, k_max + 1), dtype=np.float64)
        xi = (TWO_PI / grid.length) * k
        total += float(np.sum(2.0 / (xi**2 + xi**-2)))
    return total


@dataclass(frozen=True)
class GibbsSpec:
    """Measure configuration: grid, optional L2 cutoff radius, master seed."""

    grid: GridSpec
    cutoff_R: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.cutoff_R is not None:
            r = float(self.cutoff_R)
            if not (math.isfinite(r) and r > 0.0):
                raise ValueError(f"cutoff_R must be positive, got {self.cutoff_R}")
            object.__setattr__(self, "cutoff_R", r)
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**63):
            raise ValueError("seed must be an integer in [0, 2^63)")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def v(self) -> np.ndarray:
        return energy_eigenvalues(self.grid)


@dataclass(frozen=True)
class WeightedSample:
    """One draw: the field, its log density ratio -g(u), and the cutoff flag."""

    field: FourierField
    log_weight: float
    in_support: bool


@dataclass(frozen=True)
class Ensemble:
    """Columnar sample store; identical (spec, sampler inputs) => identical bits.

    coeffs[i] holds sample i's Fourier coefficients; log_weights[i] = -g(u_i)
    for importance ensembles and 0 for MCMC ensembles (whose samples already
    target the reweighted measure); in_support marks the cutoff indicator.
    """

    spec: GibbsSpec
    sampler: str
    master_seed: int
    coeffs: np.ndarray
    log_weights: np.ndarray
    in_support: np.ndarray
    acceptance_rate: float | None = None

    def __post_init__(self):
        if self.sampler not in ("iid-importance", "pcn-mcmc"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        lw = np.asarray(self.log_weights, dtype=np.float64)
        chi = np.asarray(self.in_support, dtype=bool)
        n = coeffs.shape[0]
        if coeffs.shape != (n, self.spec.grid.modes) or lw.shape != (n,) or chi.shape != (n,):
            raise ValueError("inconsistent ensemble array shapes")
        if not np.isfinite(lw).all():
            raise ValueError("log weights must be finite")
        for arr in (coeffs, lw, chi):
            arr.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "in_support", chi)

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def field(self, i: int) -> FourierField:
        return FourierField(self.spec.grid, self.coeffs[i])

    def sample(self, i: int) -> WeightedSample:
        return WeightedSample(
            field=self.field(i),
            log_weight=float(self.log_weights[i]),
            in_support=bool(self.in_support[i]),
        )

    @property
    def samples(self):
        return tuple(self.sample(i) for i in range(len(self)))


def _stream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_gaussian(spec: GibbsSpec, count: int) -> Ensemble:
    """count iid draws from w with importance data for the Gibbs measure.

    Coordinates a_j ~ N(0, 1/v_j) independently; log_weight = -g(u);
    in_support = (|u| <= cutoff_R) when a cutoff is configured.
    """
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    count = int(count)
    grid = spec.grid
    sigma = 1.0 / np.sqrt(_interleaved(grid))
    coords = np.empty((count, 2 * grid.modes))
    for i in range(count):
        coords[i] = _stream(spec.seed, i).standard_normal(2 * grid.modes)
    coords *= sigma
    coeffs = _coords_to_coeff(coords, grid)
    log_weights = -_cubic_g(coeffs, grid)
    if spec.cutoff_R is not None:
        in_support = _l2(coeffs, grid.length) <= spec.cutoff_R
    else:
        in_support = np.ones(count, dtype=bool)
    return Ensemble(
        spec=spec,
        sampler="iid-importance",
        master_seed=spec.seed,
        coeffs=coeffs,
        log_weights=log_weights,
        in_support=in_support,
    )


def pcn_step(u: FourierField, beta: float, spec: GibbsSpec, rng: np.random.Generator, g_fn=None):
    """One preconditioned Crank-Nicolson move; returns (state, accepted).

    Proposal u' = sqrt(1-beta^2) u + beta xi with xi ~ w preserves w
    exactly, so the acceptance ratio is exp(g(u) - g(u')) alone.  A
    configured cutoff acts as hard rejection outside the ball.  beta = 0
    degenerates to the identity move (always accepted).
    """
    if not (0.0 <= beta <= 1.0):
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if g_fn is None:
        g_fn = cubic_g
    grid = spec.grid
    xi = _stream_noise(rng, grid)
    proposal = FourierField(grid, math.sqrt(1.0 - beta**2) * u.coeff + beta * xi)
    if spec.cutoff_R is not None and l2_norm(proposal) > spec.cutoff_R:
        return u, False
    log_ratio = g_fn(u) - g_fn(proposal)
    if log_ratio >= 0.0 or rng.uniform() < math.exp(log_ratio):
        return proposal, True
    return u, False


def _stream_noise(rng: np.random.Generator, grid: GridSpec) -> np.ndarray:
    """One draw xi ~ w as a coefficient vector."""
    z = rng.standard_normal(2 * grid.modes) / np.sqrt(_interleaved(grid))
    return _coords_to_coeff(z, grid)


def pcn_chain(
    spec: GibbsSpec,
    count: int,
    beta: float,
    burn_in: int = 0,
    g_fn=None,
    start: FourierField | None = None,
) -> Ensemble:
    """Length-count pCN chain targeting the (cutoff) Gibbs measure.

    Samples carry log_weight = 0: the chain's stationary law is already
    the reweighted measure, so downstream estimators treat them as
    unweighted and use batch means for the standard error.  The chain
    stream is keyed by (seed, 2^63+1), disjoint from the iid sample
    streams of the same seed.
    """
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    count, burn_in = int(count), int(burn_in)
    grid = spec.grid
    rng = _stream(spec.seed, _PCN_STREAM)
    if start is None:
        u = FourierField(grid, _stream_noise(rng, grid))
        if spec.cutoff_R is not None and l2_norm(u) > spec.cutoff_R:
            u = FourierField(grid, np.zeros(grid.modes, dtype=np.complex128))
    else:
        u = start
    accepted = 0
    coeffs = np.empty((count, grid.modes), dtype=np.complex128)
    for i in range(-burn_in, count):
        u, ok = pcn_step(u, beta, spec, rng, g_fn=g_fn)
        accepted += ok
        if i >= 0:
            coeffs[i] = u.coeff
    return Ensemble(
        spec=spec,
        sampler="pcn-mcmc",
        master_seed=spec.seed,
        coeffs=coeffs,
        log_weights=np.zeros(count),
        in_support=np.ones(count, dtype=bool),
        acceptance_rate=accepted / (count + burn_in),
    )


def cylinder_probability(spec: GibbsSpec, box) -> float:
    """w-measure of the cylinder {a_j in [lo_j, hi_j], j = 1..r}.

    The Gaussian factorizes over coordinates, so the measure is a product
    of 1-D CDF differences with standard deviations 1/sqrt(v_j).  Bounds
    may be infinite; any empty interval (hi <= lo) gives 0.  This is the
    measure of the reference Gaussian w, not of the reweighted measure.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    r = len(box)
    if r == 0:
        return 1.0
    if r > 2 * spec.grid.modes:
        raise ValueError(f"box has {r} coordinates but the space has {2 * spec.grid.modes}")
    sigma = 1.0 / np.sqrt(_interleaved(spec.grid)[:r])
    prob = 1.0
    for (lo, hi), s in zip(box, sigma):
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("box bounds must not be NaN")
        if hi <= lo:
            return 0.0
        prob *= float(norm.cdf(hi / s) - norm.cdf(lo / s))
    return prob


@dataclass(frozen=True)
class GibbsEstimate:
    """Self-normalized estimate with its uncertainty and weight diagnostics."""

    mean: float
    std_error: float
    ess: float
    degenerate: bool


def _observable_values(ens: Ensemble, F) -> np.ndarray:
    batch = getattr(F, "batch", None)
    if batch is not None:
        return np.asarray(batch(ens.coeffs, ens.spec.grid), dtype=np.float64)
    return np.array([float(F(ens.field(i))) for i in range(len(ens))])


def gibbs_expectation(ens: Ensemble, F) -> GibbsEstimate:
    """E_mu[F] from an ensemble; F is a callable on fields (or has .batch).

    Importance ensembles: self-normalized estimate with weights
    chi_i exp(-g(u_i)), delta-method standard error, and effective sample
    size (sum w)^2 / sum w^2; ess < 10 flags degeneracy.  Sums use exact
    accumulation, so the estimate is invariant under sample permutation.

    MCMC ensembles: unweighted mean with batch-means standard error
    (sqrt(n) batches), since successive states are correlated.
    """
    if len(ens) == 0:
        raise ValueError("ensemble is empty")
    values = _observable_values(ens, F)
    if ens.sampler == "pcn-mcmc":
        n = len(ens)
        mean = math.fsum(values) / n
        n_batches = max(2, int(math.isqrt(n)))
        size = n // n_batches
        if size >= 1:
            bm = values[: n_batches * size].reshape(n_batches, size).mean(axis=1)
            se = float(np.std(bm, ddof=1) / math.sqrt(n_batches))
        else:
            se = float(np.std(values, ddof=1) / math.sqrt(n))
        return GibbsEstimate(mean=mean, std_error=se, ess=float(n), degenerate=n < ESS_FLOOR)

    shift = float(np.max(ens.log_weights))
    w = np.exp(ens.log_weights - shift) * ens.in_support
    total = math.fsum(w)
    if total == 0.0:
        return GibbsEstimate(mean=math.nan, std_error=math.nan, ess=0.0, degenerate=True)
    ess = total**2 / math.fsum(w * w)
    mean = math.fsum(w * values) / total
    resid = values - mean
    se = math.sqrt(math.fsum((w * resid) ** 2)) / total
    return GibbsEstimate(mean=mean, std_error=se, ess=ess, degenerate=ess < ESS_FLOOR)


# ---------------------------------------------------------------------------
# persistence: directory of per-sample field CSVs plus a JSON manifest


def save_ensemble(ens: Ensemble, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(len(ens)):
        name = f"sample_{i:06d}.csv"
        save_field(ens.field(i), directory / name)
        files.append(name)
    grid = ens.spec.grid
    manifest = {
        "format": ENSEMBLE_FORMAT,
        "spec": {
            "length": repr(grid.length),
            "modes": grid.modes,
            "points": grid.points,
            "cutoff_R": None if ens.spec.cutoff_R is None else repr(ens.spec.cutoff_R),
            "seed": ens.spec.seed,
        },
        "sampler": ens.sampler,
        "master_seed": ens.master_seed,
        "acceptance_rate": ens.acceptance_rate,
        "count": len(ens),
        "log_weights": [float(x) for x in ens.log_weights],
        "in_support": [bool(x) for x in ens.in_support],
        "files": files,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))


def load_ensemble(directory) -> Ensemble:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != ENSEMBLE_FORMAT:
        raise ValueError(f"{directory}: not an {ENSEMBLE_FORMAT} directory")
    raw = manifest["spec"]
    spec = GibbsSpec(
        grid=GridSpec(length=float(raw["length"]), modes=raw["modes"], points=raw["points"]),
        cutoff_R=None if raw["cutoff_R"] is None else float(raw["cutoff_R"]),
        seed=raw["seed"],
    )
    fields = [load_field(directory / name) for name in manifest["files"]]
    if len(fields) != manifest["count"]:
        raise ValueError(f"{directory}: manifest count does not match file list")
    coeffs = np.array([f.coeff for f in fields]) if fields else np.empty((0, spec.grid.modes), complex)
    return Ensemble(
        spec=spec,
        sampler=manifest["sampler"],
        master_seed=manifest["master_seed"],
        coeffs=coeffs,
        log_weights=np.array(manifest["log_weights"], dtype=np.float64),
        in_support=np.array(manifest["in_support"], dtype=bool),
        acceptance_rate=manifest["acceptance_rate"],
    )
