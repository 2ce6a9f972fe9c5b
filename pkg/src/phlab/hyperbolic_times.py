"""Hyperbolic times along orbits and finite-depth Pesin-like blocks.

With ``a_i`` the block rates of :func:`phlab.dynamics.block_rates_along` and
``gamma = log(1/sigma)``, the time ``n`` is a sigma-hyperbolic time for
``x`` under ``f^ell`` exactly when ``a_{n-k+1} + ... + a_n >= k*gamma`` for
every ``1 <= k <= n``: the norm of ``Df^{-ell}`` on ``E^cu`` at
``f^{ell j}(x)`` is ``exp(-ell * a_j)``.  That is the Pliss condition, so the set
of hyperbolic times is the set of good indices.

A point ``y`` lies in the depth-``n`` block when the same condition holds for the
``n`` blocks *preceding* ``y``; hence ``f^{ell n}(x)`` is in the depth-``n`` block
whenever ``n`` is a hyperbolic time of ``x``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import dynamics as dyn
from .pliss import good_indices, min_count_bound, smallest_kappa

__all__ = [
    "HTConfig",
    "TauSet",
    "BlockEstimate",
    "SigmaCheck",
    "is_hyperbolic_time",
    "hyperbolic_times_scan",
    "tau_set",
    "tau_set_from_rates",
    "kappa_theta_report",
    "pesin_block_member",
    "block_measure",
    "block_fractions_by_depth",
    "estimate_exponent_floor",
    "suggest_sigma",
    "check_sigma",
]


@dataclass(frozen=True)
class HTConfig:
    """sigma in (0, 1), block length ``ell`` and horizon ``N`` (number of blocks).

    ``tol`` is the absolute slack allowed in the partial-sum comparison; it lets
    the exactly constant linear cocycle sit on the boundary ``sigma = 1/mu_c``
    without rounding deciding the outcome.
    """

    sigma: float
    ell: int = 1
    horizon: int = 1000
    tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.ell < 1 or self.horizon < 1:
            raise ValueError("ell and horizon must be positive")

    @property
    def gamma(self) -> float:
        return -math.log(self.sigma)


@dataclass(frozen=True)
class TauSet:
    times: tuple[int, ...]
    N: int

    @property
    def frequency(self) -> float:
        return len(self.times) / self.N

    def __contains__(self, n):
        return n in set(self.times)


@dataclass(frozen=True)
class BlockEstimate:
    ell: int
    n_depth: int
    fraction: float
    sample_size: int
    weighting: str  # "Lebesgue" or "EmpiricalMeasure"
    half_width: float  # 95% normal-approximation half-width

    def as_dict(self):
        return {
            "ell": self.ell,
            "depth": self.n_depth,
            "fraction": self.fraction,
            "sample_size": self.sample_size,
            "weighting": self.weighting,
            "half_width": self.half_width,
        }


# -- sequences -> hyperbolic times -------------------------------------------


def tau_set_from_rates(rates, gamma: float, tol: float = 1e-12) -> TauSet:
    a = np.asarray(rates, dtype=float)
    return TauSet(tuple(int(i) for i in good_indices(a, gamma, tol)), a.size)


def _is_ht_rates(rates, n: int, gamma: float, tol: float) -> bool:
    # direct check, summing the last k blocks from n downwards
    total = 0.0
    for k in range(1, n + 1):
        total += rates[n - k]
        if total < k * gamma - tol:
            return False
    return True


def hyperbolic_times_scan(rates, gamma: float, tol: float = 1e-12) -> list[int]:
    """Quadratic scan: every ``n`` in ``1..N`` checked with :func:`_is_ht_rates`."""
    a = [float(v) for v in np.asarray(rates, dtype=float)]
    return [n for n in range(1, len(a) + 1) if _is_ht_rates(a, n, gamma, tol)]


def is_hyperbolic_time(spec: dyn.MapSpec, x, n: int, cfg: HTConfig, depth: int = 48) -> bool:
    """Whether ``n`` is a ``sigma^ell`` hyperbolic time for ``x`` under ``f^ell``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return True
    pts = dyn.forward_orbit(spec, dyn.torus_point(x), n * cfg.ell)
    rates = dyn.block_rates_along(spec, pts, cfg.ell, depth)
    return _is_ht_rates(list(rates), n, cfg.gamma, cfg.tol)


def tau_set(spec: dyn.MapSpec, x, cfg: HTConfig, depth: int = 48) -> TauSet:
    pts = dyn.forward_orbit(spec, dyn.torus_point(x), cfg.horizon * cfg.ell)
    rates = dyn.block_rates_along(spec, pts, cfg.ell, depth)
    return tau_set_from_rates(rates, cfg.gamma, cfg.tol)


def kappa_theta_report(seq, L: float, gamma: float, Gamma: float) -> dict:
    """Empirical ``kappa`` and the frequency it guarantees for hyperbolic times."""
    if not L < gamma < Gamma:
        raise ValueError(f"need L < gamma < Gamma, got {L}, {gamma}, {Gamma}")
    a = np.asarray(seq, dtype=float)
    N = a.size
    n_low = int(np.count_nonzero(a < Gamma))
    kappa = smallest_kappa(a, Gamma)
    theta = 1.0 - kappa * (Gamma - L) / (Gamma - gamma)
    predicted = min_count_bound(N, Fraction(n_low, N), L, gamma, Gamma)
    return {"kappa_empirical": kappa, "theta": theta, "predicted_min_count": predicted}


# -- Pesin-like blocks ----------------------------------------------------------


def _block_condition(back_rates, gamma, tol):
    """``back_rates[..., j]`` is the rate of the block ending ``j`` blocks before y."""
    n = back_rates.shape[-1]
    prefix = np.cumsum(back_rates, axis=-1)
    need = gamma * np.arange(1, n + 1) - tol
    return np.all(prefix >= need, axis=-1)


def _backward_rates(spec, Y, cfg: HTConfig, n: int, depth: int, orbit=None):
    if orbit is not None:
        pts = np.asarray(orbit, dtype=float)[-(n * cfg.ell + 1):]
        if pts.shape[0] != n * cfg.ell + 1:
            raise ValueError("orbit is shorter than ell * depth")
    else:
        pts = dyn.backward_orbit(spec, Y, n * cfg.ell)[::-1]
    fwd = dyn.block_rates_along(spec, pts, cfg.ell, depth)
    return fwd[..., ::-1]


def pesin_block_member(
    spec: dyn.MapSpec,
    y,
    cfg: HTConfig,
    n: int = 64,
    orbit=None,
    depth: int = 48,
):
    """Membership of ``y`` in the depth-``n`` block for ``(sigma, ell)``.

    ``y`` may be a batch ``(..., d)``.  The backward orbit is a pseudo-orbit
    computed with the exact inverse; pass ``orbit`` (forward order, ending at
    ``y``) to use stored points instead.  ``n = 0`` is always a member.
    """
    Y = np.asarray(y, dtype=float)
    if n == 0:
        return np.ones(Y.shape[:-1], dtype=bool) if Y.ndim > 1 else True
    back = _backward_rates(spec, dyn.wrap(Y), cfg, n, depth, orbit)
    out = _block_condition(back, cfg.gamma, cfg.tol)
    return bool(out) if np.ndim(out) == 0 else out


def _half_width(p, n):
    return 1.959963984540054 * math.sqrt(max(p * (1 - p), 0.0) / n)


def block_measure(
    spec: dyn.MapSpec,
    cfg: HTConfig,
    depth: int = 64,
    samples: int = 512,
    rng=None,
    measure=None,
    frame_depth: int = 48,
) -> BlockEstimate:
    """Monte Carlo fraction of points in the depth-``depth`` block.

    Points are drawn uniformly (Lebesgue) or, when ``measure`` (a
    :class:`phlab.measures.GridMeasure`) is given, from that measure with a
    uniform position inside the chosen cell.
    """
    rng = np.random.default_rng(rng)
    d = spec.dim
    if measure is None:
        Y = rng.random((samples, d))
        weighting = "Lebesgue"
    else:
        Y = measure.sample(samples, rng)
        weighting = "EmpiricalMeasure"
    back = _backward_rates(spec, Y, cfg, depth, frame_depth)
    inside = _block_condition(back, cfg.gamma, cfg.tol)
    p = float(np.count_nonzero(inside)) / samples
    return BlockEstimate(cfg.ell, depth, p, samples, weighting, _half_width(p, samples))


def block_fractions_by_depth(spec, cfg: HTConfig, depths, samples=512, rng=None):
    """Fractions for several depths from one sample (nested sets, so non-increasing)."""
    rng = np.random.default_rng(rng)
    depths = sorted(int(k) for k in depths)
    Y = rng.random((samples, spec.dim))
    back = _backward_rates(spec, Y, cfg, depths[-1], 48)
    prefix = np.cumsum(back, axis=-1)
    need = cfg.gamma * np.arange(1, depths[-1] + 1) - cfg.tol
    ok_run = np.logical_and.accumulate(prefix >= need, axis=-1)
    return {k: float(np.count_nonzero(ok_run[:, k - 1])) / samples for k in depths}


# -- choosing sigma ---------------------------------------------------------------


@dataclass(frozen=True)
class SigmaCheck:
    sigma: float
    gamma: float
    floor: float
    ok: bool
    message: str


def estimate_exponent_floor(
    spec: dyn.MapSpec,
    orbits: int = 32,
    steps: int = 4000,
    rng=None,
    disk_length: float = 0.05,
) -> float:
    """Smallest finite-time center exponent over an ensemble of u-disk orbits.

    Initial points are spread along short unstable segments through uniform
    base points, so their forward orbits sample approximations of Gibbs
    u-states.  This is a heuristic stand-in for the infimum over all Gibbs
    u-states, which is not computable.
    """
    rng = np.random.default_rng(rng)
    base = rng.random((orbits, spec.dim))
    eu = dyn.cu_frames(spec, base)[..., 0]
    offs = (rng.random(orbits) - 0.5) * disk_length
    X = dyn.wrap(base + offs[:, None] * eu)
    cr = dyn.cu_rates(spec, X, 1, steps)
    return float(np.min(cr.lyapunov))


def suggest_sigma(floor: float, fraction: float = 0.5) -> float:
    """``exp(-fraction * floor)``; any fraction in (0, 1) satisfies the sigma condition."""
    if floor <= 0:
        raise ValueError(f"exponent floor {floor:.4g} is not positive; no admissible sigma")
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    return math.exp(-fraction * floor)


def check_sigma(sigma: float, floor: float, warn: bool = True) -> SigmaCheck:
    """Validate ``0 < log(1/sigma) < floor`` and warn when it fails."""
    gamma = -math.log(sigma)
    ok = 0.0 < gamma < floor
    msg = (
        f"log(1/sigma)={gamma:.4g} lies in (0, {floor:.4g})"
        if ok
        else f"log(1/sigma)={gamma:.4g} is outside (0, {floor:.4g}); hyperbolic times need not be frequent"
    )
    if not ok and warn:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return SigmaCheck(sigma, gamma, floor, ok, msg)
