"""Convex set representations used as keep-out zones and admissible regions."""

from dataclasses import dataclass, field
from typing import Literal, TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

FloatArray: TypeAlias = NDArray[np.float64]


def as_vector(values: ArrayLike, name: str) -> FloatArray:
    """Copy ``values`` into a read-only 1-D float array."""
    vector = np.array(values, dtype=np.float64)
    if vector.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise ValueError(f"{name} must be finite")
    vector.setflags(write=False)
    return vector


def as_matrix(values: ArrayLike, name: str) -> FloatArray:
    """Copy ``values`` into a read-only 2-D float array."""
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{name} must be finite")
    matrix.setflags(write=False)
    return matrix


@dataclass(slots=True, frozen=True, eq=False)
class Ellipsoid:
    """The set ``{x | xᵀAx + 2bᵀx + c <= 0}`` with ``A`` symmetric positive definite.

    Args:
        A: Symmetric positive definite shape matrix.
        b: Linear term.
        c: Constant term; the set must be nonempty, i.e. ``c - bᵀA⁻¹b < 0``.
    """

    A: FloatArray
    b: FloatArray
    c: float
    kind: Literal["ellipsoid"] = "ellipsoid"

    def __post_init__(self) -> None:
        b = as_vector(self.b, "b")
        A = np.array(self.A, dtype=np.float64)
        if A.shape != (b.size, b.size):
            raise ValueError(f"A must have shape {(b.size, b.size)}, got {A.shape}")
        scale = max(1.0, float(np.abs(A).max()))
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("A must be symmetric")
        A = 0.5 * (A + A.T)
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as e:
            raise ValueError("A must be positive definite") from e
        c = float(self.c)
        if c - float(b @ np.linalg.solve(A, b)) >= 0.0:
            raise ValueError("ellipsoid is empty: c - bᵀA⁻¹b must be negative")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_center(cls, center: ArrayLike, shape: ArrayLike) -> "Ellipsoid":
        """Build ``{x | (x - center)ᵀ shape (x - center) <= 1}``."""
        center_vector = np.asarray(center, dtype=np.float64)
        shape_matrix = np.asarray(shape, dtype=np.float64)
        return cls(
            A=shape_matrix,
            b=-shape_matrix @ center_vector,
            c=float(center_vector @ shape_matrix @ center_vector) - 1.0,
        )

    @classmethod
    def from_semi_axes(
        cls, center: ArrayLike, semi_axes: ArrayLike, rotation: ArrayLike | None = None
    ) -> "Ellipsoid":
        """Build an ellipsoid from its semi-axis lengths; ``rotation`` columns are the axis directions."""
        axes = np.asarray(semi_axes, dtype=np.float64)
        if np.any(axes <= 0.0):
            raise ValueError("semi_axes must be positive")
        frame = np.eye(axes.size) if rotation is None else np.asarray(rotation, dtype=np.float64)
        return cls.from_center(center, frame @ np.diag(1.0 / axes**2) @ frame.T)

    @property
    def dim(self) -> int:
        return int(self.b.size)

    @property
    def center(self) -> FloatArray:
        return -np.linalg.solve(self.A, self.b)

    @property
    def radius_sq(self) -> float:
        """``r²`` in the centred form ``(x - x₀)ᵀA(x - x₀) <= r²``."""
        return float(self.b @ np.linalg.solve(self.A, self.b)) - self.c

    def semi_axes(self) -> tuple[FloatArray, FloatArray]:
        """Semi-axis lengths (ascending) and the matching unit directions as columns."""
        eigenvalues, eigenvectors = np.linalg.eigh(self.A)
        lengths = np.sqrt(self.radius_sq / eigenvalues)
        order = np.argsort(lengths)
        return lengths[order], eigenvectors[:, order]

    def volume_proxy(self) -> float:
        """Product of semi-axes; proportional to the volume in a fixed dimension."""
        return float(np.prod(self.semi_axes()[0]))


@dataclass(slots=True, frozen=True, eq=False)
class Polytope:
    """The set ``{x | a_kᵀx + b_k <= 0 for all faces k}``.

    Face normals are rescaled to unit length on construction, which leaves the set unchanged.
    The polytope must be bounded and full-dimensional; its vertices are enumerated eagerly.
    """

    normals: FloatArray
    offsets: FloatArray
    kind: Literal["polytope"] = "polytope"
    vertices: FloatArray = field(init=False, repr=False)
    chebyshev_center: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        normals = np.array(self.normals, dtype=np.float64)
        offsets = np.array(self.offsets, dtype=np.float64)
        if normals.ndim != 2 or offsets.shape != (normals.shape[0],):
            raise ValueError("normals must be (K, d) and offsets (K,)")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("every face normal must be nonzero")
        normals = normals / norms[:, None]
        offsets = offsets / norms
        normals.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

        center, radius = _chebyshev_ball(normals, offsets)
        if radius <= 1e-9:
            raise ValueError("polytope is not full-dimensional")
        _check_bounded(normals, offsets)
        center.setflags(write=False)
        object.__setattr__(self, "chebyshev_center", center)
        vertices = _enumerate_vertices(normals, offsets, center)
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)

    @classmethod
    def box(cls, lower: ArrayLike, upper: ArrayLike) -> "Polytope":
        lo = np.asarray(lower, dtype=np.float64)
        hi = np.asarray(upper, dtype=np.float64)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box needs matching bounds with upper > lower")
        eye = np.eye(lo.size)
        return cls(normals=np.vstack([eye, -eye]), offsets=np.concatenate([-hi, lo]))

    @property
    def dim(self) -> int:
        return int(self.normals.shape[1])


@dataclass(slots=True, frozen=True, eq=False)
class Ball:
    """Euclidean ball ``{x | ‖x - center‖ <= radius}``."""

    center: FloatArray
    radius: float
    kind: Literal["ball"] = "ball"

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_vector(self.center, "center"))
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return int(self.center.size)


@dataclass(slots=True, frozen=True, eq=False)
class Halfspace:
    """The set ``{x | aᵀx + b <= 0}``, stored with ``‖a‖ = 1``. Unbounded, so never a keep-out zone."""

    normal: FloatArray
    offset: float
    kind: Literal["halfspace"] = "halfspace"

    def __post_init__(self) -> None:
        normal = np.array(self.normal, dtype=np.float64)
        norm = float(np.linalg.norm(normal))
        if normal.ndim != 1 or norm == 0.0:
            raise ValueError("normal must be a nonzero vector")
        normal = normal / norm
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def dim(self) -> int:
        return int(self.normal.size)


ConvexSet: TypeAlias = Ellipsoid | Polytope | Ball | Halfspace


def is_bounded(convex_set: ConvexSet) -> bool:
    return not isinstance(convex_set, Halfspace)


def _chebyshev_ball(normals: FloatArray, offsets: FloatArray) -> tuple[FloatArray, float]:
    dim = normals.shape[1]
    cost = np.zeros(dim + 1)
    cost[-1] = -1.0
    result = linprog(
        cost,
        A_ub=np.hstack([normals, np.ones((normals.shape[0], 1))]),
        b_ub=-offsets,
        bounds=[(None, None)] * dim + [(0.0, None)],
        method="highs",
    )
    match result.status:
        case 0:
            return np.array(result.x[:dim], dtype=np.float64), float(result.x[-1])
        case 2:
            raise ValueError("polytope is empty")
        case 3:
            raise ValueError("polytope is unbounded")
        case _:
            raise ValueError(f"polytope check failed: {result.message}")


def _check_bounded(normals: FloatArray, offsets: FloatArray) -> None:
    dim = normals.shape[1]
    for axis in range(dim):
        for sign in (1.0, -1.0):
            direction = np.zeros(dim)
            direction[axis] = -sign
            result = linprog(direction, A_ub=normals, b_ub=-offsets, bounds=[(None, None)] * dim, method="highs")
            if result.status == 3:
                raise ValueError(f"polytope is unbounded along axis {axis}")


def _enumerate_vertices(normals: FloatArray, offsets: FloatArray, interior: FloatArray) -> FloatArray:
    if normals.shape[1] == 1:
        bounds = -offsets / normals[:, 0]
        upper = bounds[normals[:, 0] > 0].min()
        lower = bounds[normals[:, 0] < 0].max()
        return np.array([[lower], [upper]])
    intersection = HalfspaceIntersection(np.hstack([normals, offsets[:, None]]), interior)
    points = np.asarray(intersection.intersections, dtype=np.float64)
    # qhull reports a vertex once per incident facet set; merge duplicates
    _, keep = np.unique(np.round(points, 10), axis=0, return_index=True)
    return points[np.sort(keep)]
