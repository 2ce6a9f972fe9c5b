"""Grid measures, orbit and disk averages, u-densities and the cu-disk test.

Measures live on the uniform grid of ``g^d`` cells of the torus; a point's mass
goes to the cell containing it.  Distances between grid measures use
:func:`phlab.transport.w1_grid`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .errors import (
    MeshExplosion,
    NoDisksSampled,
    ResolutionMismatch,
    TailBoundExceeds,
)
from .transport import W1Result, w1_grid

__all__ = [
    "GridMeasure",
    "cell_index",
    "birkhoff_histograms",
    "birkhoff_measure",
    "w1_distance",
    "w1_bracket",
    "UnstableDisk",
    "iterate_disk",
    "push_forward_disk_measure",
    "UDensityRatio",
    "u_density_ratio",
    "PhiFamily",
    "PHI_FAMILY_VERSION",
    "CuDisks",
    "lattice_points",
    "sample_cu_disks",
    "cu_characterization_test",
]


# -- grid measures -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Probability weights on ``g^d`` cells, stored as an array of shape ``(g,)*d``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        g = w.shape[0]
        if w.ndim not in (1, 2, 3) or any(s != g for s in w.shape):
            raise ValueError(f"weights must have shape (g,)*d, got {w.shape}")
        if g < 2:
            raise ValueError("resolution must be at least 2")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        total = math.fsum(w.ravel())
        if total <= 0:
            raise ValueError("weights sum to zero")
        if abs(total - 1.0) > 1e-12:
            w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def resolution(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.ndim

    @classmethod
    def uniform(cls, resolution: int, dim: int = 3) -> "GridMeasure":
        return cls(np.full((resolution,) * dim, 1.0 / resolution**dim))

    @classmethod
    def point_mass(cls, point, resolution: int) -> "GridMeasure":
        p = dyn.wrap(np.asarray(point, float))
        w = np.zeros((resolution,) * p.size)
        w[tuple(_cells(p, resolution))] = 1.0
        return cls(w)

    @classmethod
    def from_points(cls, points, resolution: int, weights=None) -> "GridMeasure":
        points = dyn.wrap(np.atleast_2d(np.asarray(points, float)))
        d = points.shape[-1]
        idx = cell_index(points, resolution)
        counts = np.bincount(idx, weights=weights, minlength=resolution**d)
        return cls(counts.reshape((resolution,) * d))

    @classmethod
    def mixture(cls, measures, coefficients=None) -> "GridMeasure":
        measures = list(measures)
        _same_grid(*measures)
        c = np.full(len(measures), 1.0 / len(measures)) if coefficients is None else np.asarray(coefficients, float)
        stack = np.stack([m.weights for m in measures])
        return cls(np.tensordot(c, stack, axes=1))

    def total_variation(self, other: "GridMeasure") -> float:
        _same_grid(self, other)
        return 0.5 * float(np.abs(self.weights - other.weights).sum())

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * values))

    def sample(self, n: int, rng=None) -> np.ndarray:
        """Draw ``n`` points: a cell by weight, then a uniform point inside it."""
        rng = np.random.default_rng(rng)
        g, d = self.resolution, self.dim
        flat = self.weights.ravel()
        cdf = np.cumsum(flat)
        cells = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), flat.size - 1)
        corner = np.stack(np.unravel_index(cells, self.weights.shape), axis=-1)
        return (corner + rng.random((n, d))) / g

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.weights.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        return isinstance(other, GridMeasure) and np.array_equal(self.weights, other.weights)

    __hash__ = None


def _same_grid(*measures):
    shapes = {m.weights.shape for m in measures}
    if len(shapes) > 1:
        raise ResolutionMismatch(f"grid measures have different shapes: {sorted(shapes)}")


def _cells(points, g):
    return np.minimum(np.floor(np.asarray(points) * g).astype(np.int64), g - 1)


def cell_index(points, g: int) -> np.ndarray:
    """Row-major flat cell index of each point (points already reduced mod 1)."""
    c = _cells(points, g)
    d = c.shape[-1]
    idx = c[..., 0]
    for a in range(1, d):
        idx = idx * g + c[..., a]
    return idx


def w1_bracket(mu: GridMeasure, nu: GridMeasure, tol: float = 1e-4, decide=None) -> W1Result:
    _same_grid(mu, nu)
    return w1_grid(mu.weights, nu.weights, tol=tol, decide=decide)


def w1_distance(mu: GridMeasure, nu: GridMeasure, tol: float = 1e-4) -> float:
    """W1 between grid measures for the wrap-around l1 metric (certified to ``tol``)."""
    return float(w1_bracket(mu, nu, tol).value)


# -- orbit averages ------------------------------------------------------------


def birkhoff_histograms(spec: dyn.MapSpec, X, N: int, resolution: int, chunk: int = 2048) -> np.ndarray:
    """Visit counts of the orbits ``x, ..., f^{N-1}(x)`` for a batch ``X`` (B, d).

    Returns integer counts of shape ``(B, g**d)``.
    """
    X = dyn.wrap(np.atleast_2d(np.asarray(X, float)))
    B, d = X.shape
    n_cells = resolution**d
    counts = np.zeros(B * n_cells, dtype=np.int64)
    offset = (np.arange(B) * n_cells)[None, :]
    buf = np.empty((chunk, B), dtype=np.int64)
    k = 0
    for step in range(N):
        buf[k] = cell_index(X, resolution)
        k += 1
        if k == chunk or step == N - 1:
            counts += np.bincount((buf[:k] + offset).ravel(), minlength=B * n_cells)
            k = 0
        if step < N - 1:
            X = dyn.evaluate(spec, X)
    return counts.reshape(B, n_cells)


def birkhoff_measure(spec: dyn.MapSpec, x0, N: int, resolution: int) -> GridMeasure:
    """Normalized histogram of ``x0, f(x0), ..., f^{N-1}(x0)``."""
    if N < 1000:
        raise ValueError("N must be at least 1000")
    x0 = dyn.torus_point(x0)
    counts = birkhoff_histograms(spec, x0[None, :], N, resolution)[0]
    return GridMeasure((counts / N).reshape((resolution,) * x0.size))


# -- unstable disks ----------------------------------------------------------------


@dataclass(frozen=True)
class UnstableDisk:
    """A polyline tangent to ``E^u`` carrying a probability measure.

    ``points`` (K+1, d) are reduced mod 1; consecutive points are joined by the
    shortest torus displacement, so the spacing must stay below 1/2.
    ``masses`` (K,) is the mass of each segment.  After the sample budget is
    exhausted a disk may be *frozen*: then ``points`` holds one particle per
    segment (its midpoint) and the polyline structure is dropped.
    """

    points: np.ndarray
    masses: np.ndarray
    frozen: bool = False

    @classmethod
    def segment(
        cls,
        spec: dyn.MapSpec,
        center,
        length: float,
        n_samples: int = 256,
        tangent_tol: float = 1e-2,
    ) -> "UnstableDisk":
        """Straight segment of the given length through ``center`` along ``e_u``."""
        c = dyn.torus_point(center)
        e_u = dyn.cu_frames(spec, c)[..., 0]
        t = np.linspace(-0.5, 0.5, n_samples + 1) * length
        pts = dyn.wrap(c + t[:, None] * e_u)
        disk = cls(pts, np.full(n_samples, 1.0 / n_samples))
        disk.check_tangency(spec, tangent_tol)
        return disk

    @property
    def n_segments(self) -> int:
        return self.masses.size

    def segment_vectors(self) -> np.ndarray:
        return dyn.torus_delta(self.points[1:], self.points[:-1])

    def midpoints(self) -> np.ndarray:
        if self.frozen:
            return self.points
        return dyn.wrap(self.points[:-1] + 0.5 * self.segment_vectors())

    def length(self) -> float:
        return float(np.linalg.norm(self.segment_vectors(), axis=-1).sum())

    def check_tangency(self, spec: dyn.MapSpec, tol: float = 1e-2) -> float:
        """Largest angle between a segment and ``e_u`` at its midpoint."""
        v = self.segment_vectors()
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        e_u = dyn.cu_frames(spec, self.midpoints())[..., 0]
        cos = np.abs(np.einsum("kd,kd->k", v, e_u))
        sin = np.linalg.norm(v - np.einsum("kd,kd->k", v, e_u)[:, None] * e_u, axis=-1)
        worst = float(np.max(np.arctan2(sin, cos)))
        if worst > tol:
            raise ValueError(f"disk is not tangent to E^u: angle {worst:.3g} rad > {tol}")
        return worst

    def rasterize(self, resolution: int) -> np.ndarray:
        d = self.points.shape[-1]
        idx = cell_index(self.midpoints(), resolution)
        return np.bincount(idx, weights=self.masses, minlength=resolution**d)


def _refine(points, masses, spacing):
    """Split every segment longer than ``spacing`` into equal pieces."""
    v = dyn.torus_delta(points[1:], points[:-1])
    pieces = np.maximum(np.ceil(np.linalg.norm(v, axis=-1) / spacing).astype(np.int64), 1)
    if np.all(pieces == 1):
        return points, masses
    seg = np.repeat(np.arange(masses.size), pieces)
    first = np.cumsum(pieces) - pieces
    j = np.arange(seg.size) - first[seg]
    frac = (j / pieces[seg])[:, None]
    starts = dyn.wrap(points[seg] + frac * v[seg])
    new_points = np.concatenate([starts, points[-1:]])
    return new_points, np.repeat(masses / pieces, pieces)


def _disk_steps(spec, disk: UnstableDisk, n: int, spacing: float, budget: int, on_budget: str):
    """Yield ``disk, f(disk), ..., f^{n-1}(disk)`` with re-meshing."""
    pts, masses, frozen = disk.points, disk.masses, disk.frozen
    for k in range(n):
        yield UnstableDisk(pts, masses, frozen)
        if k == n - 1:
            break
        if frozen:
            pts = dyn.evaluate(spec, pts)
            continue
        # image polyline, with segments evaluated through their start points
        new_pts = dyn.evaluate(spec, pts)
        new_pts, new_masses = _refine(new_pts, masses, spacing)
        if new_masses.size > budget:
            if on_budget == "raise":
                raise MeshExplosion(f"re-meshing needs {new_masses.size} segments > budget {budget}")
            # keep one particle per current segment from here on
            mids = dyn.wrap(pts[:-1] + 0.5 * dyn.torus_delta(pts[1:], pts[:-1]))
            pts, frozen = dyn.evaluate(spec, mids), True
            continue
        pts, masses = new_pts, new_masses


def iterate_disk(
    spec: dyn.MapSpec,
    disk: UnstableDisk,
    n: int,
    spacing: float = 1e-2,
    budget: int = 1_000_000,
    on_budget: str = "freeze",
) -> UnstableDisk:
    """The re-meshed image ``f^n(disk)``."""
    out = disk
    for out in _disk_steps(spec, disk, n + 1, spacing, budget, on_budget):
        pass
    return out


def push_forward_disk_measure(
    spec: dyn.MapSpec,
    disk: UnstableDisk,
    n: int,
    resolution: int,
    spacing: float | None = None,
    budget: int = 1_000_000,
    on_budget: str = "freeze",
) -> GridMeasure:
    """Cesaro average ``(1/n) sum_{k<n} f^k_* m_D`` rasterized on the grid.

    Images are re-meshed so no segment is longer than ``spacing`` (default a
    quarter cell).  When the mesh would exceed ``budget`` segments it is either
    frozen into particles (``on_budget="freeze"``) or :class:`MeshExplosion`
    is raised (``on_budget="raise"``).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if on_budget not in ("freeze", "raise"):
        raise ValueError("on_budget must be 'freeze' or 'raise'")
    if spacing is None:
        spacing = 0.25 / resolution
    d = disk.points.shape[-1]
    acc = np.zeros(resolution**d)
    for img in _disk_steps(spec, disk, n, spacing, budget, on_budget):
        acc += img.rasterize(resolution)
    return GridMeasure((acc / n).reshape((resolution,) * d))


# -- density of Gibbs u-states along unstable leaves -----------------------------


@dataclass(frozen=True)
class UDensityRatio:
    ratio: float
    log_ratio: float
    tail_bound: float  # bound on |log of the neglected factor|
    T: int
    contraction: float
    lipschitz: float

    def as_dict(self):
        return dict(self.__dict__)


def _u_directions(spec, pts, depth=48, start=None):
    """Unit ``e_u`` at each stored backward point ``pts[n] = f^{-n}(z)``.

    The direction at the deepest point is estimated there unless ``start`` is
    given; it is then carried forward with the derivative.
    """
    T = pts.shape[0] - 1
    v = dyn.cu_frames(spec, pts[T], depth)[..., :1] if start is None else np.asarray(start, float)[:, None]
    out = np.empty_like(pts)
    out[T] = v[..., 0]
    for n in range(T, 0, -1):
        v, _ = dyn._orthonormalize(dyn.jacobian(spec, pts[n]) @ v)
        out[n - 1] = v[..., 0]
    return out


def _log_inverse_jacobians(spec, pts, e_u):
    # log |det Df^{-1}| on E^u at pts[n] = -log |Df(pts[n+1]) e_u(pts[n+1])|
    J = dyn.jacobian(spec, pts[1:])
    img = np.einsum("nij,nj->ni", J, e_u[1:])
    return -np.log(np.linalg.norm(img, axis=-1))


def _leaf_backward_orbits(spec, x, y, T):
    """Backward orbits of x and of y kept on the unstable direction through x_n."""
    xs = dyn.backward_orbit(spec, x, T + 1)
    e_x = _u_directions(spec, xs)
    ys = np.empty_like(xs)
    ys[0] = y
    dist = np.empty(T + 2)
    dist[0] = np.dot(dyn.torus_delta(y, x), e_x[0])
    for n in range(T + 1):
        raw = dyn.torus_delta(dyn.inverse(spec, ys[n]), xs[n + 1])
        s = float(np.dot(raw, e_x[n + 1]))
        ys[n + 1] = dyn.wrap(xs[n + 1] + s * e_x[n + 1])
        dist[n + 1] = s
    return xs, ys, e_x, np.abs(dist)


def u_density_ratio(
    spec: dyn.MapSpec,
    x,
    y,
    T: int = 40,
    accuracy: float | None = None,
    max_separation: float = 0.05,
    lipschitz_safety: float = 2.0,
    resolution: float = 1e-10,
) -> UDensityRatio:
    """``rho(x)/rho(y)`` for the u-density, truncated after ``T`` backward steps.

    ``y`` must lie on the local unstable segment through ``x``: within
    ``max_separation`` and displaced along ``e_u(x)``.  The neglected tail is
    bounded by ``C |v_T| / (1 - r)``, where ``|v_T|`` is the separation after
    ``T`` backward steps, ``r`` the largest observed one-step contraction of the
    separation and ``C`` the largest observed ratio between the per-step log
    Jacobian difference and the separation, times ``lipschitz_safety``.
    Separations below ``resolution`` are not resolved in double precision; they
    are excluded from the rate estimates and the tail uses at least that size.
    """
    x = dyn.torus_point(x)
    y = dyn.torus_point(y)
    delta = dyn.torus_delta(y, x)
    sep = float(np.linalg.norm(delta))
    if sep > max_separation:
        raise ValueError(f"x and y are {sep:.3g} apart (> {max_separation})")
    if sep == 0.0:
        return UDensityRatio(1.0, 0.0, 0.0, T, 0.0, 0.0)
    e_u = dyn.cu_frames(spec, x)[..., 0]
    off_leaf = np.linalg.norm(delta - np.dot(delta, e_u) * e_u) / sep
    if off_leaf > 1e-2:
        raise ValueError(f"y is not along E^u(x) (relative offset {off_leaf:.3g})")

    xs, ys, e_x, dist = _leaf_backward_orbits(spec, x, y, T)
    lx = _log_inverse_jacobians(spec, xs, e_x)
    # seed y's directions with x's at depth T so both frames share one estimate
    ly = _log_inverse_jacobians(spec, ys, _u_directions(spec, ys, start=e_x[-1]))
    diff = lx[:T] - ly[:T]
    log_ratio = math.fsum(diff)

    # separations below ``resolution`` are rounding noise; estimate rates from the rest
    d = dist[: T + 1]
    ok = d[:-1] > resolution
    steps = d[1:][ok] / d[:-1][ok]
    lip = np.abs(diff)[ok] / d[:T][ok]
    r = float(np.max(steps)) if steps.size else 0.0
    C = lipschitz_safety * float(np.max(lip)) if lip.size else 0.0
    if C == 0.0:
        tail = 0.0
    elif r >= 1.0:
        tail = math.inf
    else:
        tail = C * max(float(d[T]), resolution) / (1.0 - r)
    if accuracy is not None and tail > accuracy:
        raise TailBoundExceeds(f"tail bound {tail:.3g} exceeds requested accuracy {accuracy:.3g}")
    return UDensityRatio(math.exp(log_ratio), log_ratio, tail, T, r, C)


# -- cu-disk characterization -----------------------------------------------------

PHI_FAMILY_VERSION = 1


def _bump_1d(t):
    t = np.abs(t)
    return np.where(t < 1.0, np.cos(0.5 * np.pi * t) ** 2, 0.0)


@dataclass(frozen=True)
class PhiFamily:
    """Tensor-product bump functions on the torus.

    For each scale ``s`` the centres form the lattice ``s * Z^d`` and the bump is
    ``prod_a cos^2(pi t_a / 2)`` with ``t_a = dist(x_a, c_a)/s`` (zero for
    ``|t_a| >= 1``).  Values lie in [0, 1].  With ``include_constant`` the
    function ``phi = 1`` comes first.
    """

    scales: tuple = (1 / 4, 1 / 8, 1 / 16)
    dim: int = 3
    include_constant: bool = False
    version: int = PHI_FAMILY_VERSION

    def _axis_values(self, s, coords):
        """(n_centres_per_axis, ...) bump values for one axis."""
        n = int(round(1 / s))
        c = np.arange(n) / n
        t = coords[None, ...] - c.reshape((n,) + (1,) * np.ndim(coords))
        t = t - np.round(t)
        return _bump_1d(t / s)

    def labels(self):
        out = [("const", None)] if self.include_constant else []
        for s in self.scales:
            n = int(round(1 / s))
            for idx in np.ndindex(*(n,) * self.dim):
                out.append((s, tuple(i / n for i in idx)))
        return out

    def integrate_grid(self, mu: GridMeasure) -> np.ndarray:
        """``int phi d mu`` for every phi, in :meth:`labels` order."""
        g = mu.resolution
        centres = (np.arange(g) + 0.5) / g
        out = [np.array([math.fsum(mu.weights.ravel())])] if self.include_constant else []
        for s in self.scales:
            B = self._axis_values(s, centres)  # (n, g)
            r = mu.weights
            for _ in range(self.dim):
                r = np.tensordot(r, B, axes=([0], [1]))  # contract leading grid axis
            out.append(r.ravel())
        return np.concatenate(out)

    def integrate_samples(self, points, weights) -> np.ndarray:
        """``sum_k w_k phi(p_k)`` for batches: points (..., K, d), weights (..., K)."""
        out = [weights.sum(axis=-1, keepdims=True)] if self.include_constant else []
        for s in self.scales:
            vals = [self._axis_values(s, points[..., a]) for a in range(self.dim)]
            if self.dim == 3:
                r = np.einsum("i...k,j...k,l...k,...k->...ijl", *vals, weights)
            else:
                r = np.einsum("i...k,j...k,...k->...ij", *vals, weights)
            out.append(r.reshape(r.shape[: -self.dim] + (-1,)))
        return np.concatenate(out, axis=-1)


@dataclass(frozen=True)
class CuDisks:
    points: np.ndarray  # (n_disks, K, d), reduced mod 1
    weights: np.ndarray  # (n_disks, K), each row sums to 1
    centers: np.ndarray  # (n_disks, d)


def lattice_points(spacing: float, dim: int = 3) -> np.ndarray:
    """Points of the lattice ``spacing * Z^d`` in the unit torus, row-major."""
    n = int(round(1 / spacing))
    axes = np.meshgrid(*([np.arange(n) / n] * dim), indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=-1)


def _disk_mesh(m):
    u = np.linspace(-1.0, 1.0, m)
    U, V = np.meshgrid(u, u, indexing="ij")
    return U, V, (U**2 + V**2) <= 1.0


def sample_cu_disks(
    spec: dyn.MapSpec,
    base_points,
    radius: float = 0.1,
    ell: int = 1,
    sigma: float | None = None,
    block_depth: int = 16,
    pull_back: int = 8,
    mesh: int = 15,
) -> CuDisks:
    """Center-unstable disks of the given radius through block points.

    Base points failing the depth-``block_depth`` block test (when ``sigma`` is
    given) are discarded.  At each kept point ``z`` a flat disk in ``E^cu(z)`` is
    pulled back linearly to ``f^{-m}(z)`` and its mesh pushed forward ``m`` steps
    with the map, so the result is the forward image of a small cu-tangent patch.
    Area weights come from cross products of the pushed mesh.
    """
    from .hyperbolic_times import HTConfig, pesin_block_member

    Z = dyn.wrap(np.atleast_2d(np.asarray(base_points, float)))
    if spec.dim != 3:
        raise ValueError("cu-disks are two-dimensional and need d = 3")
    if sigma is not None:
        keep = pesin_block_member(spec, Z, HTConfig(sigma, ell), block_depth)
        Z = Z[np.atleast_1d(keep)]
    if Z.shape[0] == 0:
        raise NoDisksSampled("no sampled point passed the block test")

    m = pull_back
    back = dyn.backward_orbit(spec, Z, m)  # (m+1, B, d)
    frames = dyn.cu_frames(spec, Z)  # (B, d, 2)
    # D f^{-m} along the stored backward points
    P = np.broadcast_to(np.eye(3), Z.shape[:1] + (3, 3)).copy()
    for k in range(m):
        P = dyn.inverse_jacobian(spec, back[k]) @ P
    U, V, inside = _disk_mesh(mesh)
    # push the whole square mesh so finite differences never cross the mask
    uv = np.stack([U.ravel(), V.ravel()], axis=-1) * radius
    offsets = np.einsum("bij,bjk,nk->bni", P, frames, uv)  # at f^{-m}(z)
    pts = dyn.wrap(back[m][:, None, :] + offsets)
    for _ in range(m):
        pts = dyn.evaluate(spec, pts)

    rel = dyn.torus_delta(pts, Z[:, None, :]).reshape(Z.shape[:1] + (mesh, mesh, 3))
    du = np.gradient(rel, axis=1)
    dv = np.gradient(rel, axis=2)
    area = np.linalg.norm(np.cross(du, dv), axis=-1)[:, inside]
    w = area / area.sum(axis=1, keepdims=True)
    pts = pts.reshape(Z.shape[:1] + (mesh, mesh, 3))[:, inside]
    return CuDisks(pts, w, Z)


def cu_characterization_test(
    spec: dyn.MapSpec,
    mu: GridMeasure,
    ell: int,
    eps: float,
    phi: PhiFamily | None = None,
    disks: CuDisks | None = None,
    sigma: float | None = None,
    radius: float = 0.1,
    base: str = "lattice",
    n_disks: int = 512,
    rng=None,
) -> dict:
    """Smallest ``K`` with ``int phi d mu <= eps + K sup_W int phi dm_W`` per phi.

    ``K_empirical`` is the maximum over the family.  A phi with positive
    excess ``int phi d mu - eps`` but no mass on any disk is listed in
    ``violations`` and makes ``K_empirical`` infinite.

    Unless ``disks`` is given they are built by :func:`sample_cu_disks` through
    base points that pass the block test for ``(sigma, ell)``: the lattice of
    spacing 1/8 (``base="lattice"``, default) or ``n_disks`` points drawn from
    ``mu`` (``base="measure"``).
    """
    phi = phi or PhiFamily(dim=mu.dim)
    if disks is None:
        if base == "lattice":
            pts = lattice_points(1 / 8, mu.dim)
        elif base == "measure":
            pts = mu.sample(n_disks, np.random.default_rng(rng))
        else:
            raise ValueError(f"unknown base {base!r}")
        disks = sample_cu_disks(spec, pts, radius=radius, ell=ell, sigma=sigma)
    lhs = phi.integrate_grid(mu)
    disk_vals = phi.integrate_samples(disks.points, disks.weights)  # (n_disks, n_phi)
    sup = disk_vals.max(axis=0)
    excess = lhs - eps
    K = np.zeros_like(lhs)
    pos = excess > 0
    hit = pos & (sup > 0)
    K[hit] = excess[hit] / sup[hit]
    K[pos & (sup <= 0)] = np.inf
    labels = phi.labels()
    violations = [labels[i] for i in np.flatnonzero(pos & (sup <= 0))]
    worst = int(np.argmax(K))
    return {
        "K_empirical": float(K.max()),
        "argmax_phi": labels[worst],
        "violations": violations,
        "n_disks": int(disks.points.shape[0]),
        "n_phi": int(lhs.size),
        "phi_version": phi.version,
        "eps": eps,
    }
