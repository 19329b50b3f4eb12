"""Grid certification of the containment chain used by the contractibility proofs.

covers_ball decides whether the union of balls covers B(0, R) using a lattice
of pitch h: a lattice point within some ball by margin h*sqrt(d)/2 certifies
its whole cell, an uncovered lattice point inside B(0, R) is an exact
counterexample, and anything else is honestly Unknown (the caller refines h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResourceError
from .geomcomplex import policy_radii
from .sampler import PointCloud
from .tailprofile import RadiusSequences, ScalingPolicy, TailProfile

COVERED = "covered"
NOT_COVERED = "not_covered"
UNKNOWN = "unknown"

MAX_GRID_POINTS = 10**8


@dataclass(frozen=True)
class CoverageVerdict:
    """Outcome of a grid certificate at pitch h."""

    status: str
    h: float
    witness: tuple[float, ...] | None = None


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.atleast_2d(np.asarray(cloud, dtype=float))


def points_outside(cloud, R: float) -> list[int]:
    """Indices of points with |x_i| > R."""
    if R < 0:
        raise DomainError("radius must be nonnegative")
    pts = _as_points(cloud)
    if pts.size == 0:
        return []
    return [int(i) for i in np.nonzero(np.linalg.norm(pts, axis=1) > R)[0]]


def _exact_min_power(points: np.ndarray, centers: np.ndarray, radii: np.ndarray,
                     block: int = 4096) -> np.ndarray:
    """min_i(|p - x_i| - rho_i) for each p, chunked over the balls."""
    best = np.full(len(points), np.inf)
    for start in range(0, len(centers), block):
        stop = min(start + block, len(centers))
        dist = np.linalg.norm(points[:, None, :] - centers[None, start:stop, :], axis=2)
        best = np.minimum(best, np.min(dist - radii[None, start:stop], axis=1))
    return best


def covers_ball(centers, radii, R: float, h: float) -> CoverageVerdict:
    """Certify B(0, R) subset of the union of closed balls, at lattice pitch h.

    Covered: every lattice point p with |p| <= R + h*sqrt(d)/2 lies inside
    some ball with slack >= h*sqrt(d)/2 (so each cell is certified).
    NotCovered: some lattice point with |p| <= R is outside every ball, and is
    returned as the witness.  Unknown otherwise.
    """
    if R <= 0:
        raise DomainError("covers_ball needs R > 0")
    if h <= 0:
        raise DomainError("covers_ball needs h > 0")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    d = centers.shape[1] if centers.size else 1
    if centers.size and np.any(radii <= 0):
        raise DomainError("ball radii must be positive")
    margin = h * math.sqrt(d) / 2.0
    half_count = int(math.floor((R + margin) / h)) + 1
    axis_len = 2 * half_count + 1
    if axis_len**d > MAX_GRID_POINTS:
        raise ResourceError(
            f"coverage grid would need {axis_len}^{d} points; "
            "use a coarser h or a smaller R"
        )
    axis = np.arange(-half_count, half_count + 1, dtype=float) * h

    marked = np.zeros((axis_len,) * d, dtype=bool)
    for center, rho in zip(centers, radii):
        reff = rho - margin
        if reff <= 0:
            continue
        los, his = [], []
        empty = False
        for c in center:
            lo = max(0, int(math.ceil((c - reff) / h)) + half_count)
            hi = min(axis_len - 1, int(math.floor((c + reff) / h)) + half_count)
            if lo > hi:
                empty = True
                break
            los.append(lo)
            his.append(hi)
        if empty:
            continue
        dist_sq = np.zeros(tuple(hi - lo + 1 for lo, hi in zip(los, his)))
        for k in range(d):
            shape = [1] * d
            shape[k] = his[k] - los[k] + 1
            dist_sq = dist_sq + (axis[los[k]:his[k] + 1] - center[k]).reshape(shape) ** 2
        window = tuple(slice(lo, hi + 1) for lo, hi in zip(los, his))
        marked[window] |= dist_sq <= reff * reff

    norm_sq = np.zeros((axis_len,) * d)
    for k in range(d):
        shape = [1] * d
        shape[k] = axis_len
        norm_sq = norm_sq + (axis**2).reshape(shape)

    in_outer = norm_sq <= (R + margin) ** 2
    failures = in_outer & ~marked
    if not failures.any():
        return CoverageVerdict(COVERED, h)

    inner_fail = failures & (norm_sq <= R * R)
    if inner_fail.any() and centers.size:
        # nonzero() walks indices in C order, so the witness is deterministic
        idx = np.nonzero(inner_fail)
        pts = np.stack([axis[idx[k]] for k in range(d)], axis=1)
        gaps = _exact_min_power(pts, centers, radii)
        hit = np.nonzero(gaps > 0)[0]
        if hit.size:
            witness = tuple(float(x) for x in pts[int(hit[0])])
            return CoverageVerdict(NOT_COVERED, h, witness)
    elif inner_fail.any():
        idx = np.nonzero(inner_fail)
        witness = tuple(float(axis[idx[k][0]]) for k in range(d))
        return CoverageVerdict(NOT_COVERED, h, witness)
    return CoverageVerdict(UNKNOWN, h)


@dataclass(frozen=True)
class ProxyReport:
    """Both halves of the containment chain, with the doubled radii recorded."""

    chain_holds: bool | None          # None when coverage stayed Unknown
    outside_indices: tuple[int, ...]
    coverage: CoverageVerdict
    sequences: RadiusSequences


def contractibility_proxy(cloud: PointCloud, policy: ScalingPolicy,
                          profile: TailProfile, sequences: RadiusSequences,
                          h: float | None = None,
                          refinements: int = 2) -> ProxyReport:
    """Check points inside crackle radius AND doubled balls covering it.

    The balls carry twice the policy radius, matching the contractibility
    statements.  The grid pitch defaults to min(radius)/8 and is halved up to
    ``refinements`` times while the certificate stays Unknown; an Unknown
    final verdict is reported as indeterminate (None), never as False.
    Empty clouds are NotCovered here; the experiment layer applies its own
    vacuous-truth convention for them.
    """
    outside = tuple(points_outside(cloud, sequences.crackle_radius))
    if len(cloud) == 0:
        verdict = CoverageVerdict(NOT_COVERED, h or 1.0,
                                  witness=(0.0,) * profile.d)
        return ProxyReport(False, outside, verdict, sequences)
    radii = 2.0 * policy_radii(policy, profile, cloud)
    if h is None:
        h = float(np.min(radii)) / 8.0
    verdict = covers_ball(cloud.points, radii, sequences.crackle_radius, h)
    for _ in range(refinements):
        if verdict.status != UNKNOWN:
            break
        h /= 2.0
        verdict = covers_ball(cloud.points, radii, sequences.crackle_radius, h)
    if verdict.status == UNKNOWN:
        chain: bool | None = None
    else:
        chain = (not outside) and verdict.status == COVERED
    return ProxyReport(chain, outside, verdict, sequences)
