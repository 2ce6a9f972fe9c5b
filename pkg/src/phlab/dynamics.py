"""Torus map families, derivative cocycles and center-unstable growth rates.

Every map here has the form ``f(x) = M h(x) mod 1`` with ``M`` an integer
unimodular matrix and ``h`` a near-identity diffeomorphism of the torus whose
inverse is explicit, so ``f^{-1}(y) = h^{-1}(M^{-1} y)`` is exact up to rounding.

Families
--------
LinearAutomorphism
    ``h = id``.
DerivedFromAnosov
    ``h`` replaces the first coordinate by the lift of a Blaschke (Moebius)
    circle map ``t -> t - atan2(a sin 2 pi t, 1 + a cos 2 pi t)/pi`` with
    ``a = scale * epsilon``.  It fixes ``0`` and ``1/2``, contracts near 0 and
    expands near 1/2, so it is not volume preserving.  Its inverse is the same
    map with ``-a``.
SkewProductShear
    ``h(x) = x + epsilon * sin(2 pi x_0)/(2 pi) * e_2`` on T^3, composed with a
    block matrix ``[[A, 0], [n, 1]]`` (a skew product over a cat map with a
    circle fibre).  Volume preserving, central exponent zero.

The default linear part :data:`DEFAULT_MATRIX` is symmetric with eigenvalues
approximately 0.198, 1.555 and 3.247 (characteristic polynomial
``t^3 - 5t^2 + 6t - 1``, irreducible over Q).  Being symmetric, its eigenvectors
are orthogonal, so the restriction to ``E^cu`` in orthonormal frames has
singular values exactly ``mu_c`` and ``mu_u``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CocycleOverflow, NoConvergence, SplittingError

__all__ = [
    "Family",
    "MapSpec",
    "DEFAULT_MATRIX",
    "PRODUCT_MATRIX",
    "SKEW_MATRIX",
    "torus_point",
    "wrap",
    "torus_delta",
    "evaluate",
    "inverse",
    "jacobian",
    "inverse_jacobian",
    "OrbitSegment",
    "orbit_segment",
    "backward_orbit",
    "cocycle_product",
    "cocycle_product_scaled",
    "SplittingFrame",
    "estimate_splitting",
    "cu_frames",
    "CuRates",
    "cu_rates",
    "forward_orbit",
    "block_rates_along",
    "central_expansion_sequence",
    "LyapunovEstimate",
    "lyapunov_estimate",
    "parse_matrix",
]

DEFAULT_MATRIX = ((1, 1, 0), (1, 2, 1), (0, 1, 2))
# cat map times the identity: center exponent exactly zero
PRODUCT_MATRIX = ((2, 1, 0), (1, 1, 0), (0, 0, 1))
SKEW_MATRIX = ((2, 1, 0), (1, 1, 0), (1, 0, 1))

_LOG_FLOAT_MAX = math.log(np.finfo(float).max)
_TWO_PI = 2.0 * math.pi


class Family(str, enum.Enum):
    LINEAR = "LinearAutomorphism"
    DA = "DerivedFromAnosov"
    SKEW = "SkewProductShear"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "linearautomorphism": cls.LINEAR,
            "linear": cls.LINEAR,
            "derivedfromanosov": cls.DA,
            "da": cls.DA,
            "skewproductshear": cls.SKEW,
            "skew": cls.SKEW,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown map family {name!r}") from None


def parse_matrix(text: str) -> tuple[tuple[int, ...], ...]:
    """Parse ``"a,b,c;d,e,f;g,h,i"`` into a tuple of integer rows."""
    rows = [r for r in text.replace(" ", "").split(";") if r]
    out = tuple(tuple(int(v) for v in r.split(",")) for r in rows)
    if not out or any(len(r) != len(out) for r in out):
        raise ValueError(f"matrix {text!r} is not square")
    return out


@dataclass(frozen=True)
class MapSpec:
    """Immutable description of one torus map.

    Parameters
    ----------
    family : Family or str
    matrix : square integer matrix with ``|det| = 1``
    epsilon : perturbation size (must be 0 for the linear family)
    shape : auxiliary parameters; ``(scale,)`` for DerivedFromAnosov
        (default ``(2.0,)``), unused otherwise
    check : ``"auto"``, ``"mostly_expanding"``, ``"partially_hyperbolic"`` or
        ``"none"``; ``"auto"`` picks mostly_expanding for the linear and DA
        families and partially_hyperbolic for the skew product
    """

    family: Family = Family.LINEAR
    matrix: tuple = DEFAULT_MATRIX
    epsilon: float = 0.0
    shape: tuple = ()
    check: str = "auto"

    M: np.ndarray = field(init=False, repr=False, compare=False)
    M_inv: np.ndarray = field(init=False, repr=False, compare=False)
    moduli: np.ndarray = field(init=False, repr=False, compare=False)
    eigvecs: np.ndarray = field(init=False, repr=False, compare=False)
    epsilon_max: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        fam = Family.parse(self.family)
        set_(self, "family", fam)
        mat = tuple(tuple(int(v) for v in row) for row in self.matrix)
        set_(self, "matrix", mat)
        set_(self, "epsilon", float(self.epsilon))
        M = np.array(mat, dtype=np.int64)
        d = M.shape[0]
        if M.shape != (d, d) or d not in (2, 3):
            raise ValueError(f"matrix must be 2x2 or 3x3, got shape {M.shape}")
        det = round(np.linalg.det(M))
        M_inv = np.rint(np.linalg.inv(M)).astype(np.int64)
        if abs(det) != 1 or not np.array_equal(M @ M_inv, np.eye(d, dtype=np.int64)):
            raise ValueError("matrix must be unimodular (|det| = 1)")
        set_(self, "M", M.astype(float))
        set_(self, "M_inv", M_inv.astype(float))

        if fam is Family.DA and not self.shape:
            set_(self, "shape", (2.0,))
        set_(self, "shape", tuple(float(s) for s in self.shape))

        w, V = np.linalg.eig(M.astype(float))
        order = np.argsort(np.abs(w))
        set_(self, "moduli", np.abs(w[order]))
        set_(self, "eigvecs", np.real_if_close(V[:, order]))

        check = self.check
        if check == "auto":
            check = "partially_hyperbolic" if fam is Family.SKEW else "mostly_expanding"
        self._validate_spectrum(check, w)
        set_(self, "epsilon_max", self._epsilon_threshold())

        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if fam is Family.LINEAR and self.epsilon != 0.0:
            raise ValueError("LinearAutomorphism takes epsilon = 0")
        if fam is Family.SKEW:
            if d != 3 or np.any(M[:2, 2] != 0) or M[2, 2] != 1:
                raise ValueError("SkewProductShear needs a 3x3 matrix of the form [[A, 0], [n, 1]]")
        if fam is Family.DA and abs(self.shape[0] * self.epsilon) >= 1:
            raise ValueError("DerivedFromAnosov needs |scale * epsilon| < 1")
        if check != "none" and self.epsilon > self.epsilon_max:
            raise ValueError(
                f"epsilon={self.epsilon} exceeds the admissible threshold {self.epsilon_max:.4g}"
            )

    def _validate_spectrum(self, check, w):
        if check == "none":
            return
        mod = np.sort(np.abs(w))
        distinct = np.all(np.diff(mod) > 1e-9)
        if check == "mostly_expanding":
            ok = distinct and mod[0] < 1 < mod[1] and np.all(np.abs(np.imag(w)) < 1e-12)
            if not ok:
                raise ValueError(
                    f"matrix spectrum {np.round(w, 6)} is not of the form 0 < mu_s < 1 < mu_c < mu_u"
                )
        elif check == "partially_hyperbolic":
            if not (distinct and mod[0] < 1 < mod[-1]):
                raise ValueError(f"matrix spectrum {np.round(w, 6)} is not partially hyperbolic")
        else:
            raise ValueError(f"unknown check {check!r}")

    def _epsilon_threshold(self) -> float:
        # Bauer-Fike: eigenvalues of M (I + E) move by at most cond(V) ||M|| ||E||.
        # Admit perturbations that move them by less than half the smallest gap.
        if self.family is Family.LINEAR:
            return 0.0
        mod = self.moduli
        gap = float(np.min(np.diff(mod)))
        V = np.asarray(self.eigvecs, dtype=complex)
        delta = gap / (2.0 * np.linalg.cond(V) * np.linalg.norm(self.M, 2))
        if self.family is Family.DA:
            # ||Dh - I|| = 2a/(1-a) for the Blaschke map with parameter a
            a = delta / (2.0 + delta)
            return a / self.shape[0]
        return delta

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    @property
    def volume_preserving(self) -> bool:
        return self.family is not Family.DA or self.epsilon == 0.0

    def with_epsilon(self, epsilon: float) -> "MapSpec":
        fam = self.family
        if fam is Family.LINEAR and epsilon != 0:
            fam = Family.DA
        return MapSpec(fam, self.matrix, epsilon, self.shape, self.check)

    def describe(self) -> dict:
        return {
            "family": self.family.value,
            "matrix": [list(r) for r in self.matrix],
            "epsilon": self.epsilon,
            "shape": list(self.shape),
        }


# -- torus helpers ---------------------------------------------------------


def wrap(x):
    """Reduce coordinates into [0, 1)."""
    x = np.asarray(x, dtype=float)
    r = x - np.floor(x)
    return np.where(r >= 1.0, 0.0, r)


def torus_point(coords) -> np.ndarray:
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size not in (2, 3):
        raise ValueError("a torus point has 2 or 3 coordinates")
    if not np.all(np.isfinite(p)):
        raise ValueError("torus point must be finite")
    return wrap(p)


def torus_delta(y, x):
    """Shortest lifted displacement ``y - x`` on the torus, per coordinate in [-1/2, 1/2)."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return d - np.floor(d + 0.5)


# -- the maps ---------------------------------------------------------------


def _blaschke(t, a):
    s = np.sin(_TWO_PI * t)
    c = np.cos(_TWO_PI * t)
    return t - np.arctan2(a * s, 1.0 + a * c) / math.pi


def _blaschke_deriv(t, a):
    return (1.0 - a * a) / (1.0 + 2.0 * a * np.cos(_TWO_PI * t) + a * a)


def _h(spec: MapSpec, x):
    if spec.family is Family.LINEAR or spec.epsilon == 0.0:
        return x
    y = np.array(x, dtype=float, copy=True)
    if spec.family is Family.DA:
        y[..., 0] = _blaschke(x[..., 0], spec.shape[0] * spec.epsilon)
    else:
        y[..., 2] = x[..., 2] + spec.epsilon * np.sin(_TWO_PI * x[..., 0]) / _TWO_PI
    return y


def _h_inv(spec: MapSpec, y):
    if spec.family is Family.LINEAR or spec.epsilon == 0.0:
        return y
    x = np.array(y, dtype=float, copy=True)
    if spec.family is Family.DA:
        x[..., 0] = _blaschke(y[..., 0], -spec.shape[0] * spec.epsilon)
    else:
        x[..., 2] = y[..., 2] - spec.epsilon * np.sin(_TWO_PI * y[..., 0]) / _TWO_PI
    return x


def _dh(spec: MapSpec, x):
    d = spec.dim
    J = np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()
    if spec.family is Family.LINEAR or spec.epsilon == 0.0:
        return J
    if spec.family is Family.DA:
        J[..., 0, 0] = _blaschke_deriv(x[..., 0], spec.shape[0] * spec.epsilon)
    else:
        J[..., 2, 0] = spec.epsilon * np.cos(_TWO_PI * x[..., 0])
    return J


def evaluate(spec: MapSpec, x):
    """``f(x) mod 1`` for one point ``(d,)`` or a batch ``(..., d)``."""
    x = np.asarray(x, dtype=float)
    return wrap(_h(spec, x) @ spec.M.T)


def inverse(spec: MapSpec, y):
    y = np.asarray(y, dtype=float)
    return wrap(_h_inv(spec, y @ spec.M_inv.T))


def jacobian(spec: MapSpec, x):
    """``Df(x)``, shape ``(..., d, d)``."""
    x = np.asarray(x, dtype=float)
    return spec.M @ _dh(spec, x)


def inverse_jacobian(spec: MapSpec, y):
    """Derivative of ``f^{-1}`` at ``y``, i.e. ``Df(f^{-1} y)^{-1}``."""
    y = np.asarray(y, dtype=float)
    z = y @ spec.M_inv.T
    Jh = _dh(spec, _h_inv(spec, z))
    return np.linalg.inv(Jh) @ spec.M_inv


# -- orbits and cocycles ----------------------------------------------------


@dataclass(frozen=True)
class OrbitSegment:
    points: np.ndarray  # (n+1, d): x, f(x), ..., f^n(x)
    jacobians: np.ndarray  # (n+1, d, d): Df at each point

    def __len__(self):
        return self.points.shape[0]


def orbit_segment(spec: MapSpec, x, n: int) -> OrbitSegment:
    x = torus_point(x)
    pts = np.empty((n + 1, spec.dim))
    pts[0] = x
    for k in range(n):
        pts[k + 1] = evaluate(spec, pts[k])
    return OrbitSegment(pts, jacobian(spec, pts))


def backward_orbit(spec: MapSpec, x, n: int) -> np.ndarray:
    """Points ``x, f^{-1}(x), ..., f^{-n}(x)`` for one point or a batch.

    Shape ``(n+1, ..., d)``.  Backward iteration amplifies rounding along the
    stable bundle, so for large ``n`` this is a pseudo-orbit; derivative data
    must always be evaluated on the stored points rather than re-iterated.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = wrap(x)
    for k in range(n):
        out[k + 1] = inverse(spec, out[k])
    return out


def cocycle_product_scaled(spec: MapSpec, x, n: int, max_steps: int = 10**6):
    """``Df^n(x) = exp(log_scale) * P`` with ``||P||_2 = 1``.

    Negative ``n`` multiplies inverse derivatives along the backward orbit.
    """
    if abs(n) > max_steps:
        raise ValueError(f"|n| = {abs(n)} exceeds max_steps = {max_steps}")
    p = torus_point(x)
    d = spec.dim
    P = np.eye(d)
    log_scale = 0.0
    step = evaluate if n >= 0 else inverse
    dstep = jacobian if n >= 0 else inverse_jacobian
    for _ in range(abs(n)):
        P = dstep(spec, p) @ P
        p = step(spec, p)
        s = np.max(np.abs(P))
        P /= s
        log_scale += math.log(s)
    s = np.linalg.norm(P, 2)
    return P / s, log_scale + math.log(s)


def cocycle_product(spec: MapSpec, x, n: int, max_steps: int = 10**6) -> np.ndarray:
    P, log_scale = cocycle_product_scaled(spec, x, n, max_steps)
    if log_scale >= _LOG_FLOAT_MAX - 1.0:
        raise CocycleOverflow(f"log-scale {log_scale:.1f} of Df^{n} is not representable")
    return P * math.exp(log_scale)


# -- Gram-Schmidt on stacks of frames ----------------------------------------


def _orthonormalize(V):
    """Modified Gram-Schmidt on the columns of ``V`` (..., d, k).

    Returns ``Q`` (..., d, k) and upper triangular ``R`` (..., k, k) with
    positive diagonal such that ``V = Q R``.
    """
    k = V.shape[-1]
    Q = np.array(V, dtype=float, copy=True)
    R = np.zeros(V.shape[:-2] + (k, k))
    for j in range(k):
        for i in range(j):
            r = np.einsum("...d,...d->...", Q[..., :, i], Q[..., :, j])
            R[..., i, j] = r
            Q[..., :, j] -= r[..., None] * Q[..., :, i]
        nrm = np.sqrt(np.einsum("...d,...d->...", Q[..., :, j], Q[..., :, j]))
        R[..., j, j] = nrm
        Q[..., :, j] /= nrm[..., None]
    return Q, R


def _generic_frame(d: int, k: int) -> np.ndarray:
    # fixed, deterministic, in general position w.r.t. the default eigenbasis
    G = np.array([[1.0, 0.37, -0.52], [0.61, 1.0, 0.29], [-0.23, 0.71, 1.0]])[:d, :d]
    Q, _ = _orthonormalize(G[:, :k])
    return Q


def _canonical_sign(v):
    v = np.asarray(v, dtype=float)
    i = np.argmax(np.abs(v), axis=-1)
    s = np.sign(np.take_along_axis(v, i[..., None], axis=-1))
    s = np.where(s == 0, 1.0, s)
    return v * s


def _subspace_angle(A, B) -> float:
    """Largest principal angle between column spans of orthonormal A and B."""
    resid = B - A @ (A.T @ B)
    s = np.linalg.norm(resid, 2) if resid.ndim == 2 else np.linalg.norm(resid)
    return float(np.arcsin(min(1.0, s)))


def _vec_angle(a, b) -> float:
    """Angle between the lines spanned by a and b (sign ignored)."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    s = np.linalg.norm(b - a * np.dot(a, b))
    return float(np.arctan2(s, abs(np.dot(a, b))))


def _push(spec: MapSpec, pts, V, backward=False):
    """Push frame V along stored points pts[m], pts[m-1], ..., pts[1]."""
    deriv = inverse_jacobian if backward else jacobian
    for k in range(pts.shape[0] - 1, 0, -1):
        V, _ = _orthonormalize(deriv(spec, pts[k]) @ V)
    return V


@dataclass(frozen=True)
class SplittingFrame:
    point: np.ndarray
    e_s: np.ndarray
    e_c: np.ndarray
    e_u: np.ndarray
    e_cu: np.ndarray  # (d, d-1), orthonormal columns spanning E^cu
    e_cs: np.ndarray  # (d, d-1), orthonormal columns spanning E^cs
    residual: float
    depth: int

    def angle_s_cu(self) -> float:
        resid = self.e_s - self.e_cu @ (self.e_cu.T @ self.e_s)
        return float(np.arcsin(min(1.0, np.linalg.norm(resid))))


def estimate_splitting(
    spec: MapSpec,
    x,
    depth: int = 48,
    tol: float = 1e-8,
    min_angle: float = 1e-3,
) -> SplittingFrame:
    """Estimate ``E^s, E^c, E^u`` (and ``E^cu``, ``E^cs``) at ``x`` by power iteration.

    ``E^u`` and ``E^cu`` are the dominant 1- and (d-1)-dimensional subspaces of
    ``Df^depth`` applied at ``f^{-depth}(x)``; ``E^s`` and ``E^cs`` likewise for
    ``Df^{-depth}`` at ``f^{depth}(x)``.  ``E^c`` is the intersection of ``E^cu``
    and ``E^cs`` (equal to ``E^u`` on T^2).  The residual is the largest angular
    change caused by the last extra step of iteration.
    """
    x = torus_point(x)
    d = spec.dim
    V0 = _generic_frame(d, d - 1)
    back = backward_orbit(spec, x, depth)
    fwd = np.empty((depth + 1, d))
    fwd[0] = x
    for k in range(depth):
        fwd[k + 1] = evaluate(spec, fwd[k])

    cu = _push(spec, back, V0)
    cu_prev = _push(spec, back[:-1], V0)
    cs = _push(spec, fwd, V0, backward=True)
    cs_prev = _push(spec, fwd[:-1], V0, backward=True)

    residual = max(
        _subspace_angle(cu, cu_prev),
        _subspace_angle(cs, cs_prev),
        _vec_angle(cu[:, 0], cu_prev[:, 0]),
        _vec_angle(cs[:, 0], cs_prev[:, 0]),
    )
    e_u = _canonical_sign(cu[:, 0])
    e_s = _canonical_sign(cs[:, 0])
    if d == 3:
        n_cu = np.cross(cu[:, 0], cu[:, 1])
        n_cs = np.cross(cs[:, 0], cs[:, 1])
        e_c = np.cross(n_cu, n_cs)
        nrm = np.linalg.norm(e_c)
        if nrm < math.sin(min_angle):
            raise SplittingError("E^cu and E^cs are nearly equal; no transverse center direction")
        e_c = _canonical_sign(e_c / nrm)
    else:
        e_c = e_u.copy()
    frame = SplittingFrame(x, e_s, e_c, e_u, cu, cs, residual, depth)
    angle = frame.angle_s_cu()
    if angle < min_angle:
        raise SplittingError(f"angle between E^s and E^cu is {angle:.3g} rad < {min_angle}")
    if residual > tol:
        raise NoConvergence(
            f"splitting residual {residual:.3g} exceeds tolerance {tol:.3g} at depth {depth}",
            {"residual": residual, "depth": depth},
        )
    return frame


def cu_frames(spec: MapSpec, X, depth: int = 48) -> np.ndarray:
    """Orthonormal ``E^cu`` frames ``(..., d, d-1)`` at a batch of points.

    Power iteration along the backward pseudo-orbit, without the convergence
    bookkeeping of :func:`estimate_splitting`.
    """
    X = wrap(np.asarray(X, dtype=float))
    d = spec.dim
    back = backward_orbit(spec, X, depth)
    V = np.broadcast_to(_generic_frame(d, d - 1), X.shape[:-1] + (d, d - 1)).copy()
    return _push(spec, back, V)


# -- center-unstable growth rates --------------------------------------------


def _log_sigma_max_2x2(P):
    a, b, c, e = P[..., 0, 0], P[..., 0, 1], P[..., 1, 0], P[..., 1, 1]
    t = a * a + b * b + c * c + e * e
    det = a * e - b * c
    disc = np.sqrt(np.maximum(t * t - 4.0 * det * det, 0.0))
    return 0.5 * np.log(0.5 * (t + disc))


class _RestrictedProduct:
    """Running product of restricted derivatives with separate log-scale.

    Only the triangular factors of Gram-Schmidt enter, so ``log|det|`` is the
    exact sum of ``log`` of their diagonals and the smallest singular value is
    ``|det| / sigma_max``, which never underflows.
    """

    def __init__(self, batch_shape, k):
        self.k = k
        self.P = np.broadcast_to(np.eye(k), batch_shape + (k, k)).copy()
        self.log_scale = np.zeros(batch_shape)
        self.log_det = np.zeros(batch_shape)

    def push(self, R):
        self.log_det += np.log(np.abs(np.diagonal(R, axis1=-2, axis2=-1))).sum(axis=-1)
        if self.k == 1:
            return
        P = R @ self.P
        s = np.max(np.abs(P), axis=(-2, -1))
        self.P = P / s[..., None, None]
        self.log_scale += np.log(s)

    def log_sigma_min(self):
        if self.k == 1:
            return self.log_det.copy()
        return self.log_det - (self.log_scale + _log_sigma_max_2x2(self.P))


@dataclass(frozen=True)
class CuRates:
    """Block growth rates along a batch of orbits.

    ``rates[..., i-1]`` is ``(1/ell) log`` of the smallest singular value of
    ``Df^ell`` restricted to ``E^cu`` at ``f^{ell (i-1)}(x)``, i.e. the
    ``a_i`` fed to the Pliss machinery.  ``lyapunov`` is the same quantity for the
    whole segment of ``ell*count`` steps, ``lyapunov_half`` for its first half.
    """

    rates: np.ndarray
    lyapunov: np.ndarray
    lyapunov_half: np.ndarray
    ell: int
    end_points: np.ndarray


def forward_orbit(spec: MapSpec, X, n: int) -> np.ndarray:
    """Points ``x, f(x), ..., f^n(x)`` for one point or a batch, shape ``(n+1, ..., d)``."""
    X = wrap(np.asarray(X, dtype=float))
    out = np.empty((n + 1,) + X.shape)
    out[0] = X
    for k in range(n):
        out[k + 1] = evaluate(spec, out[k])
    return out


def _cu_step(spec: MapSpec, x, Q):
    return _orthonormalize(jacobian(spec, x) @ Q)


def block_rates_along(spec: MapSpec, pts, ell: int, depth: int = 48) -> np.ndarray:
    """Block rates along stored points ``pts`` (forward order, ``(K+1, ..., d)``).

    The ``E^cu`` frame at ``pts[0]`` comes from :func:`cu_frames`; Jacobians are
    evaluated only on the stored points, so a reversed backward pseudo-orbit can
    be passed as well.  Returns ``(..., K // ell)``.
    """
    pts = np.asarray(pts, dtype=float)
    count = (pts.shape[0] - 1) // ell
    batch = pts.shape[1:-1]
    Q = cu_frames(spec, pts[0], depth)
    rates = np.empty(batch + (count,))
    for i in range(count):
        block = _RestrictedProduct(batch, spec.dim - 1)
        for j in range(i * ell, (i + 1) * ell):
            Q, R = _cu_step(spec, pts[j], Q)
            block.push(R)
        rates[..., i] = block.log_sigma_min() / ell
    return rates


def cu_rates(spec: MapSpec, X, ell: int, count: int, depth: int = 48) -> CuRates:
    """Push ``E^cu`` frames along orbits of ``X`` and collect block rates.

    Streams the orbit, so memory does not grow with ``ell * count``.
    """
    if ell < 1 or count < 1:
        raise ValueError("ell and count must be positive")
    X = wrap(np.asarray(X, dtype=float))
    batch = X.shape[:-1]
    k = spec.dim - 1
    Q = cu_frames(spec, X, depth)
    rates = np.empty(batch + (count,))
    total = _RestrictedProduct(batch, k)
    half_blocks = max(count // 2, 1)
    lyap_half = None
    for i in range(count):
        block = _RestrictedProduct(batch, k)
        for _ in range(ell):
            Q, R = _cu_step(spec, X, Q)
            block.push(R)
            total.push(R)
            X = evaluate(spec, X)
        rates[..., i] = block.log_sigma_min() / ell
        if i + 1 == half_blocks:
            lyap_half = total.log_sigma_min() / (half_blocks * ell)
    lyap = total.log_sigma_min() / (count * ell)
    return CuRates(rates, lyap, lyap_half, ell, X)


def central_expansion_sequence(spec: MapSpec, x, ell: int, count: int, depth: int = 48) -> np.ndarray:
    """The sequence ``a_1..a_count`` for a single starting point."""
    return cu_rates(spec, torus_point(x), ell, count, depth).rates


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    band: float
    N: int
    half_value: float

    def as_dict(self):
        return {"value": self.value, "band": self.band, "N": self.N, "half_value": self.half_value}


def lyapunov_estimate(spec: MapSpec, x, N: int, tol: float | None = None, depth: int = 48) -> LyapunovEstimate:
    """Finite-time minimum center exponent ``(1/N) log ||(Df^N|E^cu)^{-1}||^{-1}``.

    The band is ``|estimate(N) - estimate(N/2)|``.
    """
    if N < 1000:
        raise ValueError("N must be at least 1000")
    # count=2 blocks of N/2: lyapunov_half is exactly the N/2 estimate
    if N % 2:
        raise ValueError("N must be even")
    cr = cu_rates(spec, torus_point(x), N // 2, 2, depth)
    value, half = float(cr.lyapunov), float(cr.lyapunov_half)
    band = abs(value - half)
    if tol is not None and band > tol:
        raise NoConvergence(
            f"Lyapunov band {band:.3g} exceeds tolerance {tol:.3g}",
            {"value": value, "half_value": half, "band": band, "N": N},
        )
    return LyapunovEstimate(value, band, N, half)
