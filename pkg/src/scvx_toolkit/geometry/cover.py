"""Minimum-volume ellipsoidal covers of intersecting keep-out sets."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull
from scipy.stats import norm, qmc

from scvx_toolkit.geometry.intersection import intersects
from scvx_toolkit.geometry.sets import Ball, ConvexSet, Ellipsoid, FloatArray, Halfspace, Polytope

logger = logging.getLogger(__name__)

SURFACE_DIRECTIONS = 256
KHACHIYAN_TOLERANCE = 1e-6
KHACHIYAN_MAX_ITERATIONS = 100_000
VOLUME_SLACK = 1e-3


class DegenerateCoverError(ValueError):
    """Raised when the sets to cover span a lower-dimensional subspace."""

    def __init__(self, direction: FloatArray) -> None:
        super().__init__(f"cover surrogate is flat along direction {np.array2string(direction, precision=6)}")
        self.direction = direction


@dataclass(slots=True, frozen=True, eq=False)
class MergedObstacle:
    """A keep-out set after merging; ``members`` are the indices of the original sets it replaces."""

    region: ConvexSet
    members: tuple[int, ...]

    @property
    def is_cover(self) -> bool:
        return len(self.members) > 1


def sphere_directions(dim: int, count: int = SURFACE_DIRECTIONS) -> FloatArray:
    """Quasi-uniform unit directions: a Sobol sequence pushed through the normal quantile, plus antipodes."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    sobol = qmc.Sobol(d=dim, scramble=False)
    sobol.fast_forward(1)
    uniform = np.clip(sobol.random(count), 1e-12, 1.0 - 1e-12)
    gaussian = norm.ppf(uniform)
    norms = np.linalg.norm(gaussian, axis=1)
    keep = norms > 1e-9
    directions = gaussian[keep] / norms[keep, None]
    return np.vstack([directions, -directions])


def sample_boundary(convex_set: ConvexSet, count: int = SURFACE_DIRECTIONS) -> FloatArray:
    """Points spanning the boundary of a bounded set: surface samples for smooth sets, vertices for polytopes."""
    match convex_set:
        case Ellipsoid():
            # with A = LLᵀ, x₀ + r·L⁻ᵀs lies on the boundary for every unit s
            factor = np.linalg.cholesky(convex_set.A)
            directions = sphere_directions(convex_set.dim, count)
            offsets = np.sqrt(convex_set.radius_sq) * np.linalg.solve(factor.T, directions.T).T
            return convex_set.center + offsets
        case Ball(center=center, radius=radius):
            return center + radius * sphere_directions(convex_set.dim, count)
        case Polytope(vertices=vertices):
            return np.array(vertices)
        case Halfspace():
            raise ValueError("cannot cover an unbounded halfspace")
    raise TypeError(f"unsupported set {type(convex_set).__name__}")


def khachiyan(
    points: FloatArray, *, tolerance: float = KHACHIYAN_TOLERANCE, max_iterations: int = KHACHIYAN_MAX_ITERATIONS
) -> tuple[FloatArray, FloatArray]:
    """Minimum-volume enclosing ellipsoid of a point cloud by Khachiyan's barycentric coordinate ascent.

    Returns:
        ``(shape, center)`` with the ellipsoid ``{x | (x - center)ᵀ shape (x - center) <= 1}``.
    """
    count, dim = points.shape
    if count <= dim:
        raise ValueError("the number of points must exceed the dimension")
    lifted = np.vstack([points.T, np.ones(count)])
    weights = np.full(count, 1.0 / count)
    error = tolerance + 1.0
    iterations = 0
    while error > tolerance and iterations < max_iterations:
        scatter = np.einsum("ij,j,kj->ik", lifted, weights, lifted)
        leverage = np.einsum("ji,jk,ki->i", lifted, np.linalg.inv(scatter), lifted)
        j = int(np.argmax(leverage))
        step = (1.0 - dim / (leverage[j] - 1.0)) / (dim + 1.0)
        updated = (1.0 - step) * weights
        updated[j] += step
        error = float(np.linalg.norm(updated - weights))
        weights = updated
        iterations += 1
    if error > tolerance:
        logger.warning("Khachiyan iteration stopped at the cap with error %.3e", error)
    center = weights @ points
    covariance = np.einsum("ji,j,jk->ik", points, weights, points) - np.outer(center, center)
    shape = np.linalg.inv(covariance * dim)
    return 0.5 * (shape + shape.T), center


def mvee_cover(sets: Sequence[ConvexSet], *, volume_slack: float = VOLUME_SLACK) -> Ellipsoid:
    """An ellipsoid covering every set, within ``1 + volume_slack`` of the sampled surrogate's MVEE in volume.

    Raises:
        DegenerateCoverError: The union is flat along some direction.
        ValueError: ``sets`` is empty, mixes dimensions, or contains an unbounded set.
    """
    if not sets:
        raise ValueError("sets must not be empty")
    dim = sets[0].dim
    if any(s.dim != dim for s in sets):
        raise ValueError("sets must share one dimension")

    surrogate = np.vstack([sample_boundary(s) for s in sets])
    centered = surrogate - surrogate.mean(axis=0)
    _, singular_values, right = np.linalg.svd(centered, full_matrices=False)
    if singular_values.size < dim or singular_values[-1] <= 1e-9 * max(singular_values[0], 1.0):
        raise DegenerateCoverError(right[-1] if singular_values.size == dim else np.eye(dim)[-1])

    shape, center = khachiyan(_hull_vertices(surrogate))
    shape = shape / (1.0 + volume_slack) ** (2.0 / dim)
    offsets = surrogate - center
    worst = float(np.max(np.einsum("ij,jk,ik->i", offsets, shape, offsets)))
    if worst > 1.0:
        shape = shape / worst
    logger.debug("cover of %d sets from %d surrogate points", len(sets), surrogate.shape[0])
    return Ellipsoid.from_center(center, shape)


def merge_intersecting(sets: Sequence[ConvexSet]) -> list[MergedObstacle]:
    """Replace every group of pairwise-intersecting sets by its ellipsoidal cover, until no two sets meet.

    Groups are the connected components of the intersection graph. A cover may touch a set it did not
    absorb, so merging repeats on the result.
    """
    merged = [MergedObstacle(region=s, members=(i,)) for i, s in enumerate(sets)]
    while True:
        parent = list(range(len(merged)))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                if find(i) != find(j) and intersects(merged[i].region, merged[j].region):
                    parent[find(j)] = find(i)

        groups: dict[int, list[int]] = {}
        for i in range(len(merged)):
            groups.setdefault(find(i), []).append(i)
        if len(groups) == len(merged):
            return merged

        merged = [
            _merge_group([merged[i] for i in members])
            for members in sorted(groups.values(), key=lambda g: min(min(merged[i].members) for i in g))
        ]


def _merge_group(group: list[MergedObstacle]) -> MergedObstacle:
    members = tuple(sorted(index for item in group for index in item.members))
    if len(group) == 1:
        return group[0]
    logger.info("covering intersecting obstacles %s with one ellipsoid", members)
    return MergedObstacle(region=mvee_cover([item.region for item in group]), members=members)


def _hull_vertices(points: FloatArray) -> FloatArray:
    if points.shape[1] == 1:
        return np.array([[points.min()], [points.max()]])
    hull = ConvexHull(points)
    vertices = points[np.unique(hull.vertices)]
    if vertices.shape[0] <= points.shape[1]:
        return points
    return vertices
