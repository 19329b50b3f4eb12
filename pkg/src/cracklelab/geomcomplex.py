"""Geometric graphs and Cech / Vietoris-Rips complexes with variable radii.

Conventions follow the defining inequalities exactly and asymmetrically:

* graph (and hence Rips): edge iff |x_i - x_j| <= (sigma_i + sigma_j)/2 + tol,
  i.e. half-radius balls touch;
* Cech: a k-face iff the full-radius balls share a common point, certified by
  an exact LP-type test on at most d+1 balls.

Closed-ball convention throughout: tangency within a 1e-9 band counts as
intersection, which keeps simplex membership monotone in the radii.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, ResourceError
from .sampler import PointCloud
from .tailprofile import KNN, ScalingPolicy, TailProfile

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SimplicialComplex:
    """Simplices grouped by dimension; each simplex a strictly increasing tuple."""

    n_vertices: int
    simplices: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def max_dim(self) -> int:
        return len(self.simplices) - 1

    def counts(self) -> tuple[int, ...]:
        return tuple(len(level) for level in self.simplices)

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * len(level) for k, level in enumerate(self.simplices))

    def validate(self) -> None:
        """Check sortedness, bounds, uniqueness and downward closure."""
        for k, level in enumerate(self.simplices):
            seen = set()
            for s in level:
                if len(s) != k + 1 or list(s) != sorted(set(s)):
                    raise DomainError(f"malformed {k}-simplex {s}")
                if s[0] < 0 or s[-1] >= self.n_vertices:
                    raise DomainError(f"vertex index out of range in {s}")
                if s in seen:
                    raise DomainError(f"duplicate simplex {s}")
                seen.add(s)
            if k > 0:
                lower = set(self.simplices[k - 1])
                for s in level:
                    for facet in itertools.combinations(s, k):
                        if facet not in lower:
                            raise DomainError(f"missing facet {facet} of {s}")

    def to_text(self) -> str:
        """One line per simplex, dimension-ordered then lexicographic."""
        lines = []
        for level in self.simplices:
            for s in sorted(level):
                lines.append(" ".join(str(i) for i in s))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "SimplicialComplex":
        levels: dict[int, list[tuple[int, ...]]] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            s = tuple(int(tok) for tok in line.split())
            levels.setdefault(len(s) - 1, []).append(s)
        if not levels:
            return cls(0, ((),))
        max_dim = max(levels)
        simplices = tuple(tuple(sorted(levels.get(k, []))) for k in range(max_dim + 1))
        n_vertices = max((s[-1] for level in simplices for s in level), default=-1) + 1
        return cls(n_vertices, simplices)


# -- per-vertex radii ---------------------------------------------------------

def knn_radii(cloud: PointCloud, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point."""
    if k >= len(cloud):
        raise DomainError(f"knn policy needs k < point count, got k={k}, N={len(cloud)}")
    tree = cKDTree(cloud.points)
    dist, _ = tree.query(cloud.points, k=k + 1)  # first hit is the point itself
    return np.ascontiguousarray(dist[:, k])


def policy_radii(policy: ScalingPolicy, profile: TailProfile, cloud: PointCloud) -> np.ndarray:
    """Radius at every vertex of the cloud under the policy."""
    if policy.kind == KNN:
        return policy.multiplier * knn_radii(cloud, policy.k)
    factors = policy._scale_factor_at_radius(profile, cloud.norms())
    return policy.multiplier * policy.bandwidth * np.asarray(factors, dtype=float)


def radius_at(policy: ScalingPolicy, profile: TailProfile, cloud: PointCloud, i: int) -> float:
    """Radius at vertex i."""
    if not (0 <= i < len(cloud)):
        raise DomainError(f"vertex index {i} out of range")
    if policy.kind == KNN:
        return float(policy.multiplier * knn_radii(cloud, policy.k)[i])
    return policy.radius(profile, cloud.points[i])


# -- exact ball-intersection test ---------------------------------------------

def power_center(centers: np.ndarray, radii: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimize max_i(|p - x_i|^2 - rho_i^2) over p, exactly.

    The maximum of quadratics with identical leading term is an LP-type
    problem; by minimax duality its value is the maximum over the probability
    simplex of g(lam) = lam.c - lam'G lam with G the Gram matrix of the
    centers and c_i = |x_i|^2 - rho_i^2, attained at p = X'lam.  Each face of
    the simplex contributes one linear stationarity system; concavity of g
    makes any feasible stationary point of a face optimal for that face, so
    scanning all faces is exact.  Returns (min value, argmin point).
    """
    x = np.asarray(centers, dtype=float)
    rho = np.asarray(radii, dtype=float)
    m, d = x.shape
    if m > d + 1:
        raise DomainError(f"at most d+1 = {d + 1} balls are ever needed in R^{d}, got {m}")
    if np.any(rho <= 0):
        raise DomainError("ball radii must be positive")
    c = np.einsum("ij,ij->i", x, x) - rho**2
    gram = x @ x.T

    def primal(p: np.ndarray) -> float:
        return float(np.max(np.sum((p[None, :] - x) ** 2, axis=1) - rho**2))

    best_val = math.inf
    best_p = x[0]
    for r in range(1, m + 1):
        for subset in itertools.combinations(range(m), r):
            idx = list(subset)
            size = len(idx)
            a = np.zeros((size + 1, size + 1))
            a[:size, :size] = 2.0 * gram[np.ix_(idx, idx)]
            a[:size, size] = 1.0
            a[size, :size] = 1.0
            b = np.concatenate([c[idx], [1.0]])
            lam_mu, residual, *_ = np.linalg.lstsq(a, b, rcond=None)
            if not np.allclose(a @ lam_mu, b, atol=1e-9 * max(1.0, float(np.abs(b).max()))):
                continue  # no stationary point on this face
            lam = lam_mu[:size]
            if np.any(lam < -1e-9):
                continue  # stationary point outside the face
            p = lam @ x[idx]
            val = primal(p)
            if val < best_val:
                best_val = val
                best_p = p
    return best_val, best_p


def balls_intersect(centers, radii, tol: float = DEFAULT_TOL) -> bool:
    """True iff the closed balls share a common point, up to the tol band."""
    val, _ = power_center(np.atleast_2d(np.asarray(centers, dtype=float)),
                          np.atleast_1d(np.asarray(radii, dtype=float)))
    return val <= tol


def _pair_power_value(dist: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Vectorized two-ball power minimum (closed form of power_center for m=2)."""
    d2 = dist**2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(d2 > 0, (d2 + r1**2 - r2**2) / (2.0 * d2), 0.5)
    t_clip = np.clip(t, 0.0, 1.0)
    both = (t_clip * dist) ** 2 - r1**2
    # off-segment optimum degenerates to a single center
    at_a = np.maximum(-(r1**2), d2 - r2**2)
    at_b = np.maximum(-(r2**2), d2 - r1**2)
    out = np.where(t < 0, at_a, np.where(t > 1, at_b, both))
    return np.where(d2 == 0, np.maximum(-(r1**2), -(r2**2)), out)


# -- graph and complexes --------------------------------------------------------

def _pairwise_edges(points: np.ndarray, thresholds_fn, block: int = 512):
    """Pairs (i, j), i < j, with |x_i - x_j| <= threshold(i, j); chunked O(N^2)."""
    n = len(points)
    edges = []
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = points[start:stop, None, :] - points[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        keep = thresholds_fn(np.arange(start, stop), np.arange(n), dist)
        ii, jj = np.nonzero(keep)
        for a, b in zip(ii + start, jj):
            if a < b:
                edges.append((int(a), int(b)))
    edges.sort()
    return edges


def build_graph(cloud: PointCloud, policy: ScalingPolicy, profile: TailProfile,
                tol: float = DEFAULT_TOL) -> list[tuple[int, int]]:
    """Edges {i, j} with |x_i - x_j| <= (sigma_i + sigma_j)/2 + tol."""
    if len(cloud) == 0:
        return []
    sigma = policy_radii(policy, profile, cloud)

    def rule(rows, cols, dist):
        return dist <= 0.5 * (sigma[rows][:, None] + sigma[cols][None, :]) + tol

    return _pairwise_edges(cloud.points, rule)


def _forward_adjacency(n: int, edges: list[tuple[int, int]]) -> list[np.ndarray]:
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
    return [np.array(sorted(nbrs), dtype=np.int64) for nbrs in adj]


def _expand_cliques(adj_forward, max_dim: int, accept, budget: list[int]):
    """Emit cliques as simplices, level by level, pruned by accept()."""
    levels: list[list[tuple[int, ...]]] = [[] for _ in range(max_dim + 1)]

    def grow(simplex: tuple[int, ...], cand: np.ndarray):
        dim = len(simplex)  # the simplices grown from here have this dimension
        for pos in range(len(cand)):
            v = int(cand[pos])
            s = simplex + (v,)
            if dim >= 2 and not accept(s):
                continue
            levels[dim].append(s)
            budget[0] -= 1
            if budget[0] < 0:
                raise ResourceError(
                    "simplex budget exceeded while enumerating cliques; "
                    "raise max_simplices or shrink the radii"
                )
            if dim < max_dim:
                nxt = np.intersect1d(cand[pos + 1:], adj_forward[v], assume_unique=True)
                if len(nxt):
                    grow(s, nxt)

    for v in range(len(adj_forward)):
        levels[0].append((v,))
        budget[0] -= 1
        if budget[0] < 0:
            raise ResourceError("simplex budget exceeded at the vertex level")
        if max_dim >= 1:
            grow((v,), adj_forward[v])
    return levels


def build_rips(cloud: PointCloud, policy: ScalingPolicy, profile: TailProfile,
               max_dim: int, tol: float = DEFAULT_TOL,
               max_simplices: int | None = None) -> SimplicialComplex:
    """Clique complex of the variable-bandwidth graph, truncated at max_dim."""
    if max_dim < 0:
        raise DomainError("max_dim must be nonnegative")
    edges = build_graph(cloud, policy, profile, tol)
    adj = _forward_adjacency(len(cloud), edges)
    budget = [max_simplices if max_simplices is not None else 10**7]
    levels = _expand_cliques(adj, max_dim, lambda s: True, budget)
    return SimplicialComplex(len(cloud), tuple(tuple(sorted(lv)) for lv in levels))


def build_cech(cloud: PointCloud, policy: ScalingPolicy, profile: TailProfile,
               max_dim: int, tol: float = DEFAULT_TOL,
               max_simplices: int | None = None) -> SimplicialComplex:
    """Cech complex on full-radius balls, k-faces certified exactly.

    Candidate k-simplices are cliques of the pairwise-intersection graph
    (a necessary condition), each certified by the LP-type test; empty triple
    intersections prune the entire superset cone, which is sound because ball
    intersections shrink under supersets.
    """
    if max_dim < 0:
        raise DomainError("max_dim must be nonnegative")
    if max_dim > cloud.d and len(cloud):
        raise DomainError(f"cech max_dim is capped at the ambient dimension d={cloud.d}")
    if len(cloud) == 0:
        return SimplicialComplex(0, ((),))
    sigma = policy_radii(policy, profile, cloud)
    points = cloud.points

    def rule(rows, cols, dist):
        r1 = sigma[rows][:, None]
        r2 = sigma[cols][None, :]
        near = dist <= r1 + r2 + 1e-6  # coarse prefilter, certified below
        vals = _pair_power_value(dist, np.broadcast_to(r1, dist.shape),
                                 np.broadcast_to(r2, dist.shape))
        return near & (vals <= tol)

    edges = _pairwise_edges(points, rule)
    adj = _forward_adjacency(len(cloud), edges)
    budget = [max_simplices if max_simplices is not None else 10**7]

    def accept(simplex: tuple[int, ...]) -> bool:
        idx = list(simplex)
        return balls_intersect(points[idx], sigma[idx], tol)

    levels = _expand_cliques(adj, max_dim, accept, budget)
    return SimplicialComplex(len(cloud), tuple(tuple(sorted(lv)) for lv in levels))
