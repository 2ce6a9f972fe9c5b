"""Ensemble experiments: physical-measure counts, stability sweeps, HT frequencies.

All randomness comes from one master seed through :class:`numpy.random.SeedSequence`;
each consumer gets its own child stream, so results do not depend on the
order in which parts of an experiment are run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import dynamics as dyn
from .errors import NonConvergentOrbits, PhlabError
from .hyperbolic_times import (
    HTConfig,
    block_measure,
    check_sigma,
    estimate_exponent_floor,
    suggest_sigma,
    tau_set_from_rates,
)
from .measures import PHI_FAMILY_VERSION, GridMeasure, birkhoff_histograms, w1_bracket
from .transport import W1Result

__all__ = [
    "ExperimentConfig",
    "ClusterResult",
    "StabilityRow",
    "StabilityReport",
    "initial_ensemble",
    "ensemble_measures",
    "cluster_measures",
    "physical_measure_count",
    "stability_sweep",
    "ht_frequency_vs_ell",
]

# child stream indices of the master seed
_STREAM_ENSEMBLE, _STREAM_SIGMA, _STREAM_BLOCKS = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "DerivedFromAnosov"
    matrix: tuple = dyn.DEFAULT_MATRIX
    shape: tuple = ()
    sweep: tuple = (0.0, 0.01, 0.02, 0.04)
    ensemble: int = 64
    orbit_length: int = 100_000
    burn_in: int = 100
    resolution: int = 16
    cluster_cells: float = 5.0
    sigma: float | None = None
    sigma_fraction: float = 0.5
    ell: int = 8
    ells: tuple = (1, 2, 4, 8)
    ht_horizon: int = 500
    block_depth: int = 64
    block_samples: int = 512
    exponent_tol: float = 0.05
    max_stray: float = 0.1
    w1_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "matrix", tuple(tuple(int(v) for v in r) for r in self.matrix))
        set_(self, "sweep", tuple(float(e) for e in self.sweep))
        set_(self, "shape", tuple(float(s) for s in self.shape))
        set_(self, "ells", tuple(int(v) for v in self.ells))
        if list(self.sweep) != sorted(self.sweep) or any(e < 0 for e in self.sweep):
            raise ValueError("sweep values must be non-negative and sorted")
        for name in ("ensemble", "orbit_length", "resolution", "ell", "ht_horizon", "block_depth", "block_samples"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.burn_in < 0 or self.seed < 0 or self.cluster_cells <= 0:
            raise ValueError("burn_in, seed must be non-negative and cluster_cells positive")
        if self.sigma is not None and not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")

    @property
    def threshold(self) -> float:
        return self.cluster_cells / self.resolution

    def spec(self, epsilon: float) -> dyn.MapSpec:
        fam = dyn.Family.parse(self.family)
        if epsilon == 0.0 and fam is dyn.Family.LINEAR:
            return dyn.MapSpec(fam, self.matrix)
        return dyn.MapSpec(fam, self.matrix, epsilon, self.shape)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["matrix"] = [list(r) for r in self.matrix]
        for k in ("sweep", "shape", "ells"):
            d[k] = list(d[k])
        return d


def _streams(seed: int):
    return np.random.SeedSequence(seed).spawn(3)


def initial_ensemble(config: ExperimentConfig, dim: int) -> np.ndarray:
    """Uniform initial points, shared by every sweep value."""
    rng = np.random.default_rng(_streams(config.seed)[_STREAM_ENSEMBLE])
    return rng.random((config.ensemble, dim))


def _stepper(spec):
    if isinstance(spec, dyn.MapSpec):
        return lambda X: dyn.evaluate(spec, X)
    return spec.evaluate


def ensemble_measures(spec, X, config: ExperimentConfig) -> np.ndarray:
    """Normalized Birkhoff histograms, shape ``(B, g**d)``, after ``burn_in`` steps."""
    step = _stepper(spec)
    X = np.array(X, dtype=float)
    for _ in range(config.burn_in):
        X = step(X)
    if isinstance(spec, dyn.MapSpec):
        counts = birkhoff_histograms(spec, X, config.orbit_length, config.resolution)
    else:
        counts = _histograms_generic(step, X, config.orbit_length, config.resolution)
    return counts / config.orbit_length


def _histograms_generic(step, X, N, g):
    from .measures import cell_index

    B, d = X.shape
    counts = np.zeros((B, g**d), dtype=np.int64)
    rows = np.arange(B)
    for _ in range(N):
        np.add.at(counts, (rows, cell_index(X, g)), 1)
        X = step(X)
    return counts


@dataclass(frozen=True)
class ClusterResult:
    count: int
    labels: tuple  # cluster label of each ensemble member, labels ordered by first appearance
    representatives: tuple  # ensemble index of each cluster's leader
    sizes: tuple
    threshold: float
    sensitivity: dict = field(default_factory=dict)  # threshold -> count

    @property
    def majority(self) -> int:
        return int(np.argmax(self.sizes))

    @property
    def stray_fraction(self) -> float:
        return 1.0 - max(self.sizes) / sum(self.sizes)


def _grid(weights, g, d):
    return GridMeasure(weights.reshape((g,) * d))


def cluster_measures(H, resolution: int, dim: int, threshold: float, order=None, tol=1e-4) -> ClusterResult:
    """Leader clustering of histograms by W1 distance.

    Members are visited in ``order`` (a canonical order, so the result does not
    depend on how the ensemble was listed).  A member joins the first leader
    within ``threshold`` and founds a new cluster only if it is farther than
    ``threshold`` from every leader; afterwards leaders within ``threshold`` of
    each other are merged.  A new cluster therefore never sits within
    ``threshold/2`` of an existing one.
    """
    B = H.shape[0]
    order = np.arange(B) if order is None else np.asarray(order)
    grids = [_grid(H[i], resolution, dim) for i in range(B)]
    leaders: list[int] = []
    assign = np.full(B, -1)

    def close(i, j):
        r = w1_bracket(grids[i], grids[j], tol=tol, decide=threshold)
        return r.value <= threshold

    for i in order:
        for c, lead in enumerate(leaders):
            if close(lead, i):
                assign[i] = c
                break
        else:
            leaders.append(int(i))
            assign[i] = len(leaders) - 1

    # merge leaders within the threshold (union-find)
    parent = list(range(len(leaders)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(len(leaders)):
        for b in range(a + 1, len(leaders)):
            if find(a) != find(b) and close(leaders[a], leaders[b]):
                parent[find(b)] = find(a)
    roots = sorted({find(a) for a in range(len(leaders))})
    relabel = {r: k for k, r in enumerate(roots)}
    labels = np.array([relabel[find(c)] for c in assign])
    sizes = tuple(int(np.count_nonzero(labels == k)) for k in range(len(roots)))
    reps = tuple(leaders[r] for r in roots)
    return ClusterResult(len(roots), tuple(int(v) for v in labels), reps, sizes, threshold)


def _canonical_order(X):
    X = np.asarray(X)
    return np.lexsort(X.T[::-1])


def _exponent_check(spec, X, config: ExperimentConfig):
    """Finite-time exponents and their N vs N/2 bands for the ensemble."""
    cr = dyn.cu_rates(spec, X, config.ell, config.ht_horizon)
    band = np.abs(cr.lyapunov - cr.lyapunov_half)
    return cr, band


def physical_measure_count(
    spec,
    config: ExperimentConfig,
    X=None,
    H=None,
    check_exponents: bool = True,
    sensitivity: bool = True,
) -> ClusterResult:
    """Number of W1 clusters among Birkhoff measures of a uniform ensemble.

    Raises :class:`NonConvergentOrbits` when more than ``max_stray`` of the
    orbits have an exponent band above ``exponent_tol``.
    """
    dim = spec.dim
    if X is None:
        X = initial_ensemble(config, dim)
    if X.shape[0] < 32:
        raise ValueError("the ensemble needs at least 32 initial points")
    if check_exponents and isinstance(spec, dyn.MapSpec):
        _, band = _exponent_check(spec, X, config)
        bad = float(np.mean(band > config.exponent_tol))
        if bad > config.max_stray:
            raise NonConvergentOrbits(f"{bad:.0%} of orbits have exponent band > {config.exponent_tol}")
    if H is None:
        H = ensemble_measures(spec, X, config)
    order = _canonical_order(X)
    t = config.threshold
    res = cluster_measures(H, config.resolution, dim, t, order, config.w1_tol)
    sens = {}
    if sensitivity:
        for factor in (0.5, 2.0):
            sens[factor] = cluster_measures(H, config.resolution, dim, factor * t, order, config.w1_tol).count
    sens[1.0] = res.count
    return ClusterResult(res.count, res.labels, res.representatives, res.sizes, t, dict(sorted(sens.items())))


# -- stability sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class StabilityRow:
    epsilon: float
    w1: float
    w1_lower: float
    w1_upper: float
    noise: float
    count: int
    stray_fraction: float
    count_half_threshold: int
    count_double_threshold: int
    ht_frequency: float
    min_exponent: float
    exponent_band: float
    sigma_ok: bool
    grid_digest: str
    error: str = ""


@dataclass
class StabilityReport:
    config: dict
    sigma: float
    sigma_floor: float
    rows: list
    measures: dict  # epsilon -> GridMeasure
    provenance: dict

    def to_json(self) -> str:
        body = {
            "config": self.config,
            "sigma": self.sigma,
            "sigma_floor": self.sigma_floor,
            "rows": [_finite_or_none(asdict(r)) for r in self.rows],
            "provenance": self.provenance,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    @property
    def ok(self) -> bool:
        return not any(r.error for r in self.rows)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]


def _finite_or_none(row: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()}


def _half_means(H, members):
    members = np.sort(members)
    half = members.size // 2
    a = H[members[:half]].mean(axis=0)
    b = H[members[half:]].mean(axis=0)
    return a, b


def _ht_frequencies(rates, gamma, tol=1e-12):
    return np.array([tau_set_from_rates(r, gamma, tol).frequency for r in rates])


def _sweep_cell(config: ExperimentConfig, eps, X, gamma, sigma, baseline):
    g = config.resolution
    spec = config.spec(eps)
    d = spec.dim
    cr, band = _exponent_check(spec, X, config)
    bad = float(np.mean(band > config.exponent_tol))
    if bad > config.max_stray:
        raise NonConvergentOrbits(f"{bad:.0%} of orbits have exponent band > {config.exponent_tol}")
    H = ensemble_measures(spec, X, config)
    cl = physical_measure_count(spec, config, X=X, H=H, check_exponents=False)
    members = np.flatnonzero(np.array(cl.labels) == cl.majority)
    mu = _grid(H[members].mean(axis=0), g, d)
    a, b = _half_means(H, members)
    noise = w1_bracket(_grid(a, g, d), _grid(b, g, d), tol=config.w1_tol).value
    if baseline is None and eps != 0.0:
        dist = W1Result(math.nan, math.nan, math.nan, 0)  # the baseline row failed
    else:
        dist = w1_bracket(mu, mu if baseline is None else baseline, tol=config.w1_tol)
    freq = _ht_frequencies(cr.rates, gamma)
    min_exp = float(np.min(cr.lyapunov))
    row = StabilityRow(
        epsilon=eps,
        w1=float(dist.value),
        w1_lower=float(dist.lower),
        w1_upper=float(dist.upper),
        noise=float(noise),
        count=cl.count,
        stray_fraction=cl.stray_fraction,
        count_half_threshold=cl.sensitivity[0.5],
        count_double_threshold=cl.sensitivity[2.0],
        ht_frequency=float(freq.mean()),
        min_exponent=min_exp,
        exponent_band=float(band.max()),
        sigma_ok=check_sigma(sigma, min_exp, warn=False).ok,
        grid_digest=mu.digest(),
    )
    return row, mu


def stability_sweep(config: ExperimentConfig) -> StabilityReport:
    """Physical measure, count, HT frequency and exponent for each sweep value.

    The same initial ensemble is used for every value.  ``mu_eps`` is the mean
    Birkhoff histogram over the majority cluster; the noise column is the W1
    distance between the means over the two halves of that cluster.  A sweep
    value whose computation fails yields a row with ``error`` set.
    """
    if 0.0 not in config.sweep:
        raise ValueError("the sweep must include 0")
    base_spec = config.spec(0.0)
    X = initial_ensemble(config, base_spec.dim)
    streams = _streams(config.seed)

    floor = estimate_exponent_floor(base_spec, rng=np.random.default_rng(streams[_STREAM_SIGMA]))
    sigma = config.sigma if config.sigma is not None else suggest_sigma(floor, config.sigma_fraction)
    gamma = -math.log(sigma)

    rows, measures = [], {}
    baseline = None
    for eps in config.sweep:
        try:
            row, mu = _sweep_cell(config, eps, X, gamma, sigma, baseline)
        except PhlabError as exc:
            nan = math.nan
            row = StabilityRow(eps, nan, nan, nan, nan, 0, nan, 0, 0, nan, nan, nan, False, "", f"{type(exc).__name__}: {exc}")
            mu = None
        if mu is not None:
            measures[eps] = mu
            if baseline is None and eps == 0.0:
                baseline = mu
        rows.append(row)
    provenance = {
        "master_seed": config.seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "phi_family_version": PHI_FAMILY_VERSION,
    }
    return StabilityReport(config.as_dict(), sigma, floor, rows, measures, provenance)


# -- hyperbolic times against block length ----------------------------------------


def ht_frequency_vs_ell(
    config: ExperimentConfig,
    epsilon: float | None = None,
    sigma: float | None = None,
    with_blocks: bool = True,
) -> list[dict]:
    """Mean and 5th-percentile HT frequency over the ensemble for each ``ell``.

    The horizon is ``config.ht_horizon`` blocks for every ``ell``.  When
    ``with_blocks`` is set each row also carries the Monte Carlo fraction of the
    depth-``block_depth`` block.
    """
    eps = config.sweep[-1] if epsilon is None else epsilon
    spec = config.spec(eps)
    streams = _streams(config.seed)
    floor = estimate_exponent_floor(spec, rng=np.random.default_rng(streams[_STREAM_SIGMA]))
    if sigma is None:
        sigma = config.sigma if config.sigma is not None else suggest_sigma(floor, config.sigma_fraction)
    check = check_sigma(sigma, floor)
    X = initial_ensemble(config, spec.dim)
    rows = []
    for ell in config.ells:
        cr = dyn.cu_rates(spec, X, ell, config.ht_horizon)
        freq = _ht_frequencies(cr.rates, -math.log(sigma))
        row = {
            "ell": ell,
            "epsilon": eps,
            "sigma": sigma,
            "sigma_ok": check.ok,
            "mean_frequency": float(freq.mean()),
            "p05_frequency": float(np.quantile(freq, 0.05)),
        }
        if with_blocks:
            be = block_measure(
                spec,
                HTConfig(sigma, ell),
                depth=config.block_depth,
                samples=config.block_samples,
                rng=np.random.default_rng(streams[_STREAM_BLOCKS]),
            )
            row.update(block_fraction=be.fraction, block_half_width=be.half_width, block_depth=be.n_depth)
        rows.append(row)
    return rows
