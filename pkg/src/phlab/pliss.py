"""Pliss-type selection of times at which all backward partial averages are large.

Given reals ``a_1..a_N`` and a threshold ``gamma``, an index ``n_i`` is *good*
when every block ending at it has average at least ``gamma``::

    a_{n+1} + ... + a_{n_i} >= gamma * (n_i - n)   for all 0 <= n < n_i.

Writing ``S(0) = 0`` and ``S(n) = a_1 + ... + a_n - n*gamma``, the good indices
are exactly the points where ``S`` reaches a (non-strict) running maximum, which
gives an O(N) algorithm.  :func:`brute_force_pliss` checks the condition
directly in O(N^2) and is kept as an independent oracle.

Two frequency guarantees are reported:

* lower-bound form: if ``a_i >= L`` for all i and at most ``kappa*N`` of the
  ``a_i`` are below ``Gamma`` (``L < gamma < Gamma``), the number of good indices
  is at least ``theta*N`` with ``theta = 1 - kappa*(Gamma-L)/(Gamma-gamma)``;
* classical form: if ``a_i <= c`` and the average ``A`` exceeds ``gamma``, at
  least ``(A-gamma)/(c-gamma) * N`` indices are good.

Index 1 counts as good whenever ``a_1 >= gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import HypothesisViolated

__all__ = [
    "PlissParams",
    "PlissResult",
    "as_sequence",
    "s_function",
    "good_indices",
    "pliss_like_indices",
    "classical_pliss_indices",
    "brute_force_pliss",
    "smallest_kappa",
    "min_count_bound",
]


def as_sequence(values) -> np.ndarray:
    """Validate and return ``values`` as a 1-d float64 array (N >= 1, all finite)."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"sequence must be one-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("sequence must contain at least one value")
    if not np.all(np.isfinite(a)):
        raise ValueError("sequence contains NaN or infinite values")
    return a


@dataclass(frozen=True)
class PlissParams:
    """Constants of the lower-bound Pliss lemma.

    ``kappa=None`` means "use the smallest admissible value for the data",
    i.e. ``#{a_i < Gamma} / N``.
    """

    lower_bound: float
    gamma: float
    Gamma: float
    kappa: float | None = None

    def theta(self, kappa: float | None = None) -> float:
        k = self.kappa if kappa is None else kappa
        if k is None:
            raise ValueError("kappa is unknown; pass it explicitly")
        return 1.0 - k * (self.Gamma - self.lower_bound) / (self.Gamma - self.gamma)


@dataclass(frozen=True)
class PlissResult:
    indices: tuple[int, ...]
    theta_bound: float
    N: int
    kappa: float | None = None
    checked: bool = True
    guaranteed_count: int = 0

    @property
    def m(self) -> int:
        return len(self.indices)

    def as_dict(self) -> dict:
        return {
            "indices": list(self.indices),
            "m": self.m,
            "theta": self.theta_bound,
            "N": self.N,
            "kappa": self.kappa,
            "checked": self.checked,
            "guaranteed_count": self.guaranteed_count,
        }


def s_function(seq: Sequence[float], gamma: float) -> np.ndarray:
    """Return ``S_0..S_N`` with ``S_0 = 0`` and increments ``a_n - gamma``."""
    a = as_sequence(seq)
    S = np.empty(a.size + 1)
    S[0] = 0.0
    np.cumsum(a - gamma, out=S[1:])
    return S


def good_indices(seq: Sequence[float], gamma: float, tol: float = 0.0) -> np.ndarray:
    """1-based indices n with ``S(n) >= S(k) - tol`` for every ``0 <= k < n``."""
    S = s_function(seq, gamma)
    running_max = np.maximum.accumulate(S)[:-1]
    return np.flatnonzero(S[1:] >= running_max - tol) + 1


def brute_force_pliss(seq: Sequence[float], gamma: float, tol: float = 0.0) -> np.ndarray:
    """Check every pair ``n < n_i`` directly.

    Row ``n`` of the partial-sum table holds ``a_{n+1} + ... + a_i`` summed left
    to right, so no prefix-sum identity is used.  O(N^2) time and memory.
    """
    a = as_sequence(seq)
    N = a.size
    upper = np.triu(np.broadcast_to(a, (N, N)))  # row n keeps a_{n+1}..a_N (1-based)
    sums = np.cumsum(upper, axis=1)  # sums[n, i-1] = a_{n+1} + ... + a_i for i > n
    lengths = np.arange(1, N + 1)[None, :] - np.arange(N)[:, None]
    ok = sums >= gamma * lengths - tol
    ok |= lengths <= 0  # only pairs with n < n_i are constrained
    return np.flatnonzero(ok.all(axis=0)) + 1


def smallest_kappa(seq: Sequence[float], Gamma: float) -> float:
    a = as_sequence(seq)
    return int(np.count_nonzero(a < Gamma)) / a.size


def min_count_bound(N: int, kappa, lower_bound, gamma, Gamma) -> int:
    """``ceil(theta*N)`` clamped to ``[0, N]``, evaluated in exact rational arithmetic.

    Float rounding of ``theta*N`` could otherwise push the ceiling across an
    integer.
    """
    k = Fraction(kappa) if not isinstance(kappa, Fraction) else kappa
    theta = 1 - k * (Fraction(Gamma) - Fraction(lower_bound)) / (Fraction(Gamma) - Fraction(gamma))
    return min(max(math.ceil(theta * N), 0), N)


def _check_lower_form(a: np.ndarray, params: PlissParams, kappa: float, kappa_exact) -> None:
    L, g, G = params.lower_bound, params.gamma, params.Gamma
    if not L < g < G:
        raise HypothesisViolated(f"need L < gamma < Gamma, got L={L}, gamma={g}, Gamma={G}")
    if kappa < 0:
        raise HypothesisViolated(f"kappa must be non-negative, got {kappa}")
    below_L = np.flatnonzero(a < L)
    if below_L.size:
        raise HypothesisViolated(
            f"{below_L.size} values below the lower bound L={L} (first at index {below_L[0] + 1})"
        )
    n_low = int(np.count_nonzero(a < G))
    if Fraction(n_low) > kappa_exact * a.size:
        raise HypothesisViolated(
            f"#{{a_i < Gamma}} = {n_low} exceeds kappa*N = {kappa * a.size:g}"
        )


def pliss_like_indices(
    seq: Sequence[float],
    params: PlissParams,
    *,
    checked: bool = True,
    tol: float = 0.0,
) -> PlissResult:
    """Good indices together with the lower-bound frequency guarantee.

    With ``checked=True`` the lemma's hypotheses are enforced and
    :class:`HypothesisViolated` is raised when they fail.  ``checked=False``
    returns the same index set without any guarantee (``guaranteed_count=0``).
    """
    a = as_sequence(seq)
    N = a.size
    if params.kappa is None:
        n_low = int(np.count_nonzero(a < params.Gamma))
        kappa, kappa_exact = n_low / N, Fraction(n_low, N)
    else:
        kappa, kappa_exact = float(params.kappa), Fraction(params.kappa)

    if checked:
        _check_lower_form(a, params, kappa, kappa_exact)

    well_posed = params.lower_bound < params.gamma < params.Gamma
    theta = params.theta(kappa) if well_posed else math.nan
    guaranteed = 0
    if checked:
        guaranteed = min_count_bound(N, kappa_exact, params.lower_bound, params.gamma, params.Gamma)

    idx = good_indices(a, params.gamma, tol)
    return PlissResult(tuple(int(i) for i in idx), theta, N, kappa, checked, guaranteed)


def classical_pliss_indices(
    seq: Sequence[float],
    c: float,
    gamma: float,
    *,
    checked: bool = True,
    tol: float = 0.0,
) -> PlissResult:
    """Good indices with the classical bound ``theta = (A - gamma)/(c - gamma)``.

    ``c`` is an upper bound of the sequence and ``A`` its average.  The index
    set is the same as for :func:`pliss_like_indices`; only the guarantee differs.
    """
    a = as_sequence(seq)
    N = a.size
    A = math.fsum(a) / N
    if checked:
        above = np.flatnonzero(a > c)
        if above.size:
            raise HypothesisViolated(
                f"{above.size} values exceed the upper bound c={c} (first at index {above[0] + 1})"
            )
        if not gamma < A:
            raise HypothesisViolated(f"need gamma < average, got gamma={gamma}, average={A}")
    theta = (A - gamma) / (c - gamma) if c > gamma else math.nan
    guaranteed = 0
    if checked:
        exact_A = sum((Fraction(x) for x in a), Fraction(0)) / N
        th = (exact_A - Fraction(gamma)) / (Fraction(c) - Fraction(gamma))
        guaranteed = min(max(math.ceil(th * N), 0), N)
    idx = good_indices(a, gamma, tol)
    return PlissResult(tuple(int(i) for i in idx), theta, N, None, checked, guaranteed)
