"""Discrete-time dynamics ``x_{i+1} = x_i + f(x_i, u_i)``."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal, TypeAlias

import numpy as np
from numpy.typing import ArrayLike

from scvx_toolkit.core.variables import DimensionMismatchError, StackedVariable, stack
from scvx_toolkit.geometry import FloatArray
from scvx_toolkit.geometry.sets import as_matrix, as_vector

IncrementFunction: TypeAlias = Callable[[FloatArray, FloatArray], FloatArray]
JacobianFunction: TypeAlias = Callable[[FloatArray, FloatArray], FloatArray]


@dataclass(slots=True, frozen=True, eq=False)
class LinearDynamics:
    """``x_{i+1} = A x_i + B u_i + affine_term``; the affine term carries constant feeds such as ``B g``."""

    A: FloatArray
    B: FloatArray
    affine_term: FloatArray
    kind: Literal["linear_zoh"] = "linear_zoh"

    def __post_init__(self) -> None:
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        affine_term = as_vector(self.affine_term, "affine_term")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape[0]}")
        if affine_term.shape != (n,):
            raise ValueError(f"affine_term must have length {n}, got {affine_term.size}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "affine_term", affine_term)

    @property
    def state_dim(self) -> int:
        return int(self.A.shape[0])

    @property
    def control_dim(self) -> int:
        return int(self.B.shape[1])

    @property
    def is_linear(self) -> bool:
        return True

    def step(self, x: ArrayLike, u: ArrayLike) -> FloatArray:
        return self.A @ np.asarray(x, dtype=np.float64) + self.B @ np.asarray(u, dtype=np.float64) + self.affine_term

    def increment(self, x: ArrayLike, u: ArrayLike) -> FloatArray:
        return self.step(x, u) - np.asarray(x, dtype=np.float64)

    def increment_jacobian(self, x: ArrayLike, u: ArrayLike) -> FloatArray:
        """``∂f/∂(x, u)`` as an ``n × (n + m)`` matrix."""
        return np.hstack([self.A - np.eye(self.state_dim), self.B])


@dataclass(slots=True, frozen=True, eq=False)
class ConvexDynamics:
    """Dynamics given by an increment ``f(x, u)`` whose every component is a convex function.

    Args:
        increment_fn: Evaluates ``f(x, u)``, an ``n``-vector.
        jacobian_fn: Evaluates a generalized Jacobian ``∂f/∂(x, u)``, an ``n × (n + m)`` matrix.
        convex_components: One flag per component of ``f``; every flag must be set.
    """

    increment_fn: IncrementFunction
    jacobian_fn: JacobianFunction
    state_dim: int
    control_dim: int
    convex_components: tuple[bool, ...]
    kind: Literal["componentwise_convex"] = "componentwise_convex"

    def __post_init__(self) -> None:
        if self.state_dim < 1 or self.control_dim < 1:
            raise ValueError("state_dim and control_dim must be positive")
        if len(self.convex_components) != self.state_dim:
            raise ValueError(f"convex_components must declare {self.state_dim} components")
        if not all(self.convex_components):
            missing = [j for j, flag in enumerate(self.convex_components) if not flag]
            raise ValueError(f"components {missing} are not declared convex")

    @property
    def is_linear(self) -> bool:
        return False

    def increment(self, x: ArrayLike, u: ArrayLike) -> FloatArray:
        value = np.asarray(
            self.increment_fn(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64)), dtype=np.float64
        )
        if value.shape != (self.state_dim,):
            raise DimensionMismatchError(f"increment returned shape {value.shape}", field="increment_fn")
        return value

    def step(self, x: ArrayLike, u: ArrayLike) -> FloatArray:
        return np.asarray(x, dtype=np.float64) + self.increment(x, u)

    def increment_jacobian(self, x: ArrayLike, u: ArrayLike) -> FloatArray:
        value = np.asarray(
            self.jacobian_fn(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64)), dtype=np.float64
        )
        expected = (self.state_dim, self.state_dim + self.control_dim)
        if value.shape != expected:
            raise DimensionMismatchError(
                f"jacobian returned shape {value.shape}, expected {expected}", field="jacobian_fn"
            )
        return value


DynamicsModel: TypeAlias = LinearDynamics | ConvexDynamics


def discretize_double_integrator(dt: float, dim: int, gravity: ArrayLike | None = None) -> LinearDynamics:
    """Zero-order-hold double integrator over ``dim`` position and ``dim`` velocity components.

    The state is ``(p, v)`` and the input an acceleration; ``gravity`` enters as ``B g``.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if dim < 1:
        raise ValueError("dim must be positive")
    eye = np.eye(dim)
    zero = np.zeros((dim, dim))
    A = np.block([[eye, dt * eye], [zero, eye]])
    B = np.vstack([0.5 * dt**2 * eye, dt * eye])
    feed = np.zeros(dim) if gravity is None else np.asarray(gravity, dtype=np.float64)
    if feed.shape != (dim,):
        raise ValueError(f"gravity must have length {dim}")
    return LinearDynamics(A=A, B=B, affine_term=B @ feed)


def rollout(dynamics: DynamicsModel, x0: ArrayLike, controls: Sequence[ArrayLike]) -> StackedVariable:
    """Simulate the dynamics exactly from ``x0`` under ``controls``; the result has zero dynamics defect."""
    states = [np.asarray(x0, dtype=np.float64)]
    for u in controls:
        states.append(dynamics.step(states[-1], u))
    return stack(states, list(controls))
