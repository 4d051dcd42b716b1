"""The stacked decision vector ``y = (x_1, ..., x_T, u_1, ..., u_{T-1})``."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from scvx_toolkit.geometry import FloatArray


class DimensionMismatchError(ValueError):
    """Raised when a vector does not have the dimension its position requires."""

    def __init__(self, message: str, *, index: int | None = None, field: str | None = None) -> None:
        super().__init__(message)
        self.index = index
        self.field = field


@dataclass(slots=True, frozen=True)
class StackLayout:
    """Index arithmetic for the stacked vector. Steps are 0-based: states 0..T-1, controls 0..T-2."""

    horizon: int
    state_dim: int
    control_dim: int

    def __post_init__(self) -> None:
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.state_dim < 1:
            raise ValueError("state_dim must be positive")
        if self.control_dim < 1:
            raise ValueError("control_dim must be positive")

    @property
    def size(self) -> int:
        return self.control_dim * (self.horizon - 1) + self.state_dim * self.horizon

    @property
    def control_offset(self) -> int:
        return self.state_dim * self.horizon

    def state_slice(self, step: int) -> slice:
        if not 0 <= step < self.horizon:
            raise IndexError(f"state step {step} out of range [0, {self.horizon})")
        start = step * self.state_dim
        return slice(start, start + self.state_dim)

    def control_slice(self, step: int) -> slice:
        if not 0 <= step < self.horizon - 1:
            raise IndexError(f"control step {step} out of range [0, {self.horizon - 1})")
        start = self.control_offset + step * self.control_dim
        return slice(start, start + self.control_dim)

    def state_indices(self, step: int, components: Sequence[int] | None = None) -> np.ndarray:
        block = np.arange(self.state_slice(step).start, self.state_slice(step).stop)
        return block if components is None else block[list(components)]

    def control_indices(self, step: int) -> np.ndarray:
        block = self.control_slice(step)
        return np.arange(block.start, block.stop)


@dataclass(slots=True, frozen=True, eq=False)
class StackedVariable:
    """A trajectory as one read-only vector of length ``m(T-1) + nT``."""

    data: FloatArray
    horizon: int
    state_dim: int
    control_dim: int

    def __post_init__(self) -> None:
        layout = StackLayout(self.horizon, self.state_dim, self.control_dim)
        data = np.array(self.data, dtype=np.float64)
        if data.shape != (layout.size,):
            raise DimensionMismatchError(
                f"stacked vector must have length {layout.size}, got shape {data.shape}", field="data"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def like(cls, reference: "StackedVariable", data: ArrayLike) -> "StackedVariable":
        return cls(
            data=np.asarray(data),
            horizon=reference.horizon,
            state_dim=reference.state_dim,
            control_dim=reference.control_dim,
        )

    @property
    def layout(self) -> StackLayout:
        return StackLayout(self.horizon, self.state_dim, self.control_dim)

    def state_at(self, step: int) -> FloatArray:
        return self.data[self.layout.state_slice(step)]

    def control_at(self, step: int) -> FloatArray:
        return self.data[self.layout.control_slice(step)]

    @property
    def states(self) -> FloatArray:
        return self.data[: self.layout.control_offset].reshape(self.horizon, self.state_dim)

    @property
    def controls(self) -> FloatArray:
        return self.data[self.layout.control_offset :].reshape(self.horizon - 1, self.control_dim)


def stack(states: Sequence[ArrayLike], controls: Sequence[ArrayLike]) -> StackedVariable:
    """Stack ``T`` state vectors and ``T - 1`` control vectors.

    Raises:
        DimensionMismatchError: A vector has the wrong length or the counts do not match; ``index`` names it.
    """
    state_list = [np.atleast_1d(np.asarray(s, dtype=np.float64)) for s in states]
    control_list = [np.atleast_1d(np.asarray(u, dtype=np.float64)) for u in controls]
    if len(state_list) < 2:
        raise DimensionMismatchError("at least two states are required", field="states")
    if len(control_list) != len(state_list) - 1:
        raise DimensionMismatchError(
            f"expected {len(state_list) - 1} controls for {len(state_list)} states, got {len(control_list)}",
            field="controls",
        )
    state_dim = state_list[0].size
    control_dim = control_list[0].size
    for index, state in enumerate(state_list):
        if state.shape != (state_dim,):
            raise DimensionMismatchError(
                f"state {index} has shape {state.shape}, expected ({state_dim},)", index=index, field="states"
            )
    for index, control in enumerate(control_list):
        if control.shape != (control_dim,):
            raise DimensionMismatchError(
                f"control {index} has shape {control.shape}, expected ({control_dim},)", index=index, field="controls"
            )
    return StackedVariable(
        data=np.concatenate([*state_list, *control_list]),
        horizon=len(state_list),
        state_dim=state_dim,
        control_dim=control_dim,
    )


def unstack(y: StackedVariable) -> tuple[list[FloatArray], list[FloatArray]]:
    return list(y.states), list(y.controls)
