"""Euclidean projection onto convex sets and the supporting hyperplanes built from it."""

import itertools
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import nnls

from scvx_toolkit.geometry.sets import Ball, ConvexSet, Ellipsoid, FloatArray, Halfspace, Polytope, as_vector

BOUNDARY_TOLERANCE = 1e-9
MULTIPLIER_TOLERANCE = 1e-10


class ProjectionConvergenceError(RuntimeError):
    """Raised when the iterative ellipsoid projection fails to converge."""

    def __init__(self, message: str, diagnostics: Mapping[str, float]) -> None:
        super().__init__(f"{message} ({', '.join(f'{k}={v:.3e}' for k, v in diagnostics.items())})")
        self.diagnostics = dict(diagnostics)


class AmbiguousNormalError(ValueError):
    """Raised when a supporting hyperplane is requested for a point strictly inside the set."""


@dataclass(slots=True, frozen=True, eq=False)
class ProjectionResult:
    """Outcome of projecting a query point onto a convex set.

    Attributes:
        projection: Closest point of the set (or nearest boundary point when ``inside``).
        distance: ``‖query - projection‖``.
        normal: Outward unit normal at ``projection``; zero when the query is strictly inside.
        on_boundary: Whether the query itself lies on the boundary.
        inside: Whether the query lies strictly inside the set.
    """

    projection: FloatArray
    distance: float
    normal: FloatArray
    on_boundary: bool
    inside: bool = False


@dataclass(slots=True, frozen=True, eq=False)
class HalfspaceCut:
    """The constraint ``aᵀy + b >= 0``, stored with ``‖a‖ = 1``."""

    a: FloatArray
    b: float

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=np.float64)
        norm = float(np.linalg.norm(a))
        if a.ndim != 1 or norm == 0.0:
            raise ValueError("cut normal must be a nonzero vector")
        a = a / norm
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b) / norm)

    def value(self, y: ArrayLike) -> float:
        return float(self.a @ np.asarray(y, dtype=np.float64)) + self.b

    def lifted(self, size: int, indices: ArrayLike) -> "HalfspaceCut":
        """Embed the cut into a ``size``-dimensional space, placing ``a`` at ``indices``."""
        a = np.zeros(size)
        a[np.asarray(indices, dtype=np.intp)] = self.a
        return HalfspaceCut(a=a, b=self.b)


def _check_dim(convex_set: ConvexSet, x: FloatArray) -> None:
    if x.shape != (convex_set.dim,):
        raise ValueError(f"point has shape {x.shape}, set has dimension {convex_set.dim}")


def membership_value(convex_set: ConvexSet, x: ArrayLike) -> float:
    """The scalar convex row ``q(x)``: negative inside the set, zero on its boundary, positive outside."""
    point = np.asarray(x, dtype=np.float64)
    _check_dim(convex_set, point)
    match convex_set:
        case Ellipsoid(A=A, b=b, c=c):
            return float(point @ A @ point + 2.0 * b @ point + c)
        case Polytope(normals=normals, offsets=offsets):
            return float(np.max(normals @ point + offsets))
        case Ball(center=center, radius=radius):
            return float(np.linalg.norm(point - center)) - radius
        case Halfspace(normal=normal, offset=offset):
            return float(normal @ point) + offset
    raise TypeError(f"unsupported set {type(convex_set).__name__}")


def membership_gradient(convex_set: ConvexSet, x: ArrayLike) -> FloatArray:
    """A (generalized) gradient of ``membership_value`` at ``x``."""
    point = np.asarray(x, dtype=np.float64)
    _check_dim(convex_set, point)
    match convex_set:
        case Ellipsoid(A=A, b=b):
            return 2.0 * (A @ point + b)
        case Polytope(normals=normals, offsets=offsets):
            return np.array(normals[int(np.argmax(normals @ point + offsets))])
        case Ball(center=center):
            offset = point - center
            norm = float(np.linalg.norm(offset))
            return offset / norm if norm > 0.0 else np.zeros_like(point)
        case Halfspace(normal=normal):
            return np.array(normal)
    raise TypeError(f"unsupported set {type(convex_set).__name__}")


def interior_point(convex_set: ConvexSet) -> FloatArray:
    match convex_set:
        case Ellipsoid():
            return convex_set.center
        case Polytope(chebyshev_center=center):
            return np.array(center)
        case Ball(center=center):
            return np.array(center)
        case Halfspace(normal=normal, offset=offset):
            return -(offset + 1.0) * normal
    raise TypeError(f"unsupported set {type(convex_set).__name__}")


def tie_break_direction(dim: int, index: int, seed: int) -> FloatArray:
    """Deterministic unit vector used to break exactly symmetric projection ties."""
    direction = np.random.default_rng([seed, index]).standard_normal(dim)
    return direction / np.linalg.norm(direction)


def boundary_normal(convex_set: ConvexSet, x: ArrayLike) -> FloatArray:
    """Outward unit normal at a boundary point; averages the active faces at polytope edges and vertices."""
    point = np.asarray(x, dtype=np.float64)
    match convex_set:
        case Polytope(normals=normals, offsets=offsets):
            slack = normals @ point + offsets
            active = slack >= slack.max() - BOUNDARY_TOLERANCE
            normal = normals[active].mean(axis=0)
        case _:
            normal = membership_gradient(convex_set, point)
    norm = float(np.linalg.norm(normal))
    if norm == 0.0:
        raise AmbiguousNormalError("boundary normal is undefined at this point")
    return normal / norm


def project(
    convex_set: ConvexSet, z: ArrayLike, *, tolerance: float = MULTIPLIER_TOLERANCE, max_iterations: int = 100
) -> ProjectionResult:
    """Euclidean projection of ``z`` onto the closed convex set.

    Points already in the set project onto themselves with zero distance.

    Raises:
        ProjectionConvergenceError: The ellipsoid multiplier iteration did not converge.
    """
    point = as_vector(z, "z")
    _check_dim(convex_set, point)
    value = membership_value(convex_set, point)
    if value <= BOUNDARY_TOLERANCE:
        on_boundary = abs(value) <= BOUNDARY_TOLERANCE
        normal = boundary_normal(convex_set, point) if on_boundary else np.zeros(point.size)
        return ProjectionResult(
            projection=point, distance=0.0, normal=normal, on_boundary=on_boundary, inside=not on_boundary
        )

    match convex_set:
        case Ellipsoid():
            projection = _project_ellipsoid(convex_set, point, tolerance, max_iterations)
        case Polytope():
            projection = _project_polytope(convex_set, point)
        case Ball(center=center, radius=radius):
            offset = point - center
            projection = center + radius * offset / np.linalg.norm(offset)
        case Halfspace(normal=normal, offset=offset):
            projection = point - (float(normal @ point) + offset) * normal
        case _:
            raise TypeError(f"unsupported set {type(convex_set).__name__}")

    difference = point - projection
    distance = float(np.linalg.norm(difference))
    return ProjectionResult(projection=projection, distance=distance, normal=difference / distance, on_boundary=False)


def nearest_boundary(convex_set: ConvexSet, z: ArrayLike, *, tie_break: int = 0, seed: int = 0) -> ProjectionResult:
    """Nearest boundary point of the set for a point inside (or on) it, with the outward normal there.

    Points outside are handled by :func:`project`. Exactly symmetric ties (a ball centre, an ellipsoid
    centre) are broken with :func:`tie_break_direction`.
    """
    point = as_vector(z, "z")
    _check_dim(convex_set, point)
    value = membership_value(convex_set, point)
    if value > BOUNDARY_TOLERANCE:
        return project(convex_set, point)
    if value >= -BOUNDARY_TOLERANCE:
        return ProjectionResult(
            projection=point, distance=0.0, normal=boundary_normal(convex_set, point), on_boundary=True
        )

    match convex_set:
        case Ball(center=center, radius=radius):
            offset = point - center
            norm = float(np.linalg.norm(offset))
            direction = offset / norm if norm > 0.0 else tie_break_direction(point.size, tie_break, seed)
            boundary = center + radius * direction
        case Ellipsoid():
            boundary = _ellipsoid_boundary_from_inside(convex_set, point, tie_break, seed)
        case Polytope(normals=normals, offsets=offsets):
            slack = -(normals @ point + offsets)
            face = int(np.argmin(slack))
            boundary = point + slack[face] * normals[face]
        case Halfspace(normal=normal, offset=offset):
            boundary = point - (float(normal @ point) + offset) * normal
        case _:
            raise TypeError(f"unsupported set {type(convex_set).__name__}")

    difference = boundary - point
    distance = float(np.linalg.norm(difference))
    return ProjectionResult(
        projection=boundary, distance=distance, normal=difference / distance, on_boundary=False, inside=True
    )


def supporting_cut(convex_set: ConvexSet, result: ProjectionResult) -> HalfspaceCut:
    """The separating halfspace ``aᵀy + b >= 0`` orthogonal to ``z - z̄`` through the projection point.

    Raises:
        AmbiguousNormalError: The query point was strictly inside the set.
    """
    if result.inside or (result.distance == 0.0 and not result.on_boundary):
        raise AmbiguousNormalError(
            "point lies strictly inside the keep-out set; route it through infeasible initialization"
        )
    if result.projection.shape != (convex_set.dim,):
        raise ValueError("projection result does not belong to this set")
    normal = result.normal
    return HalfspaceCut(a=normal, b=-float(normal @ result.projection))


def cut_at(convex_set: ConvexSet, x: ArrayLike, *, tie_break: int = 0, seed: int = 0) -> HalfspaceCut:
    """Supporting cut for any point: projection-based outside, nearest-boundary tangent inside."""
    point = as_vector(x, "x")
    if membership_value(convex_set, point) > BOUNDARY_TOLERANCE:
        return supporting_cut(convex_set, project(convex_set, point))
    result = nearest_boundary(convex_set, point, tie_break=tie_break, seed=seed)
    return HalfspaceCut(a=result.normal, b=-float(result.normal @ result.projection))


def _project_ellipsoid(ellipsoid: Ellipsoid, z: FloatArray, tolerance: float, max_iterations: int) -> FloatArray:
    # KKT: (I + μA) w = z - x₀ with w = x - x₀; solve the secular equation for μ >= 0
    center = ellipsoid.center
    radius_sq = ellipsoid.radius_sq
    eigenvalues, eigenvectors = np.linalg.eigh(ellipsoid.A)
    v = eigenvectors.T @ (z - center)

    def secular(mu: float) -> tuple[float, float]:
        denominator = 1.0 + mu * eigenvalues
        value = float(np.sum(eigenvalues * v**2 / denominator**2)) - radius_sq
        slope = float(-2.0 * np.sum(eigenvalues**2 * v**2 / denominator**3))
        return value, slope

    lower = 0.0
    upper = float(np.linalg.norm(v) / np.sqrt(radius_sq * eigenvalues.min()))
    mu = 0.0
    value = secular(mu)[0]
    for _ in range(max_iterations):
        value, slope = secular(mu)
        if value > 0.0:
            lower = mu
        else:
            upper = mu
        candidate = mu - value / slope if slope < 0.0 else 0.5 * (lower + upper)
        if not lower <= candidate <= upper:
            candidate = 0.5 * (lower + upper)
        if abs(candidate - mu) <= tolerance * max(1.0, mu):
            mu = candidate
            break
        mu = candidate
    else:
        raise ProjectionConvergenceError(
            "ellipsoid projection did not converge",
            {"multiplier": mu, "secular_residual": value, "bracket_width": upper - lower},
        )
    return center + eigenvectors @ (v / (1.0 + mu * eigenvalues))


def _ellipsoid_boundary_from_inside(ellipsoid: Ellipsoid, z: FloatArray, tie_break: int, seed: int) -> FloatArray:
    # KKT: (I - μA) w = z - x₀ with μ in [0, 1/λ_max)
    center = ellipsoid.center
    radius_sq = ellipsoid.radius_sq
    eigenvalues, eigenvectors = np.linalg.eigh(ellipsoid.A)
    v = eigenvectors.T @ (z - center)
    largest = eigenvalues.max()
    top = eigenvalues >= largest * (1.0 - 1e-12)
    pole = 1.0 / largest

    def secular(mu: float) -> float:
        return float(np.sum(eigenvalues * v**2 / (1.0 - mu * eigenvalues) ** 2)) - radius_sq

    scale = max(1.0, float(np.linalg.norm(z - center)))
    if np.linalg.norm(v[top]) <= 1e-12 * scale:
        # hard case: the multiplier sits at the pole and the top eigenspace absorbs the remaining length
        w = np.zeros_like(v)
        w[~top] = v[~top] / (1.0 - eigenvalues[~top] / largest)
        remaining = radius_sq - float(np.sum(eigenvalues[~top] * w[~top] ** 2))
        if remaining > 0.0:
            direction = tie_break_direction(int(top.sum()), tie_break, seed)
            w[top] = np.sqrt(remaining / largest) * direction
            return center + eigenvectors @ w
        v = v.copy()
        v[top] = 1e-12 * scale

    lower, upper = 0.0, pole
    for _ in range(200):
        mu = 0.5 * (lower + upper)
        if secular(mu) > 0.0:
            upper = mu
        else:
            lower = mu
        if upper - lower <= MULTIPLIER_TOLERANCE * pole * 1e-3:
            break
    mu = 0.5 * (lower + upper)
    return center + eigenvectors @ (v / (1.0 - mu * eigenvalues))


def _project_polytope(polytope: Polytope, z: FloatArray) -> FloatArray:
    # least-distance program min ‖p‖ s.t. -G p >= G z + h, solved through NNLS (Lawson-Hanson)
    normals, offsets = polytope.normals, polytope.offsets
    dim = polytope.dim
    rhs = normals @ z + offsets
    system = np.vstack([-normals.T, rhs[None, :]])
    target = np.zeros(dim + 1)
    target[-1] = 1.0
    weights, _ = nnls(system, target)
    residual = system @ weights - target
    candidate = None
    if abs(residual[-1]) > 1e-14:
        candidate = z - residual[:dim] / residual[-1]
        candidate = _polish_on_active_faces(polytope, z, candidate)
    if candidate is None or not _is_polytope_projection(polytope, z, candidate):
        candidate = project_polytope_enumeration(polytope, z)
    return candidate


def _polish_on_active_faces(polytope: Polytope, z: FloatArray, candidate: FloatArray) -> FloatArray:
    slack = polytope.normals @ candidate + polytope.offsets
    active = np.flatnonzero(slack >= -1e-8)
    if active.size == 0:
        return candidate
    polished = _affine_projection(polytope.normals[active], polytope.offsets[active], z)
    if polished is not None and _is_polytope_projection(polytope, z, polished):
        return polished
    return candidate


def _affine_projection(normals: FloatArray, offsets: FloatArray, z: FloatArray) -> FloatArray | None:
    gram = normals @ normals.T
    multipliers, *_ = np.linalg.lstsq(gram, normals @ z + offsets, rcond=None)
    if np.any(multipliers < -1e-12):
        return None
    return z - normals.T @ multipliers


def _is_polytope_projection(polytope: Polytope, z: FloatArray, x: FloatArray) -> bool:
    # primal feasibility plus z - x in the normal cone of the active faces
    slack = polytope.normals @ x + polytope.offsets
    if slack.max() > 1e-9:
        return False
    active = slack >= -1e-9
    difference = z - x
    if not active.any():
        return bool(np.linalg.norm(difference) <= 1e-12)
    multipliers, *_ = np.linalg.lstsq(polytope.normals[active].T, difference, rcond=None)
    reconstructed = polytope.normals[active].T @ multipliers
    return bool(
        np.all(multipliers >= -1e-9)
        and np.linalg.norm(reconstructed - difference) <= 1e-9 * max(1.0, np.linalg.norm(z))
    )


def project_polytope_enumeration(polytope: Polytope, z: FloatArray) -> FloatArray:
    """Exhaustive active-set projection onto a polytope: tries every face subset of size up to ``d``."""
    faces = range(polytope.normals.shape[0])
    best: FloatArray | None = None
    best_distance = np.inf
    for size in range(1, polytope.dim + 1):
        for subset in itertools.combinations(faces, size):
            index = list(subset)
            candidate = _affine_projection(polytope.normals[index], polytope.offsets[index], z)
            if candidate is None:
                continue
            if np.max(polytope.normals @ candidate + polytope.offsets) > 1e-9:
                continue
            distance = float(np.linalg.norm(candidate - z))
            if distance < best_distance:
                best, best_distance = candidate, distance
    if best is None:
        # the nearest point is a vertex whose active faces are linearly dependent
        distances = np.linalg.norm(polytope.vertices - z, axis=1)
        best = np.array(polytope.vertices[int(np.argmin(distances))])
    return best
