"""Quasi-linear plane PDE systems A_i grad x^i = B and their gradient split.

A system couples n scalar sheets x^i(t^1, t^2) through 2x2 coefficient
matrices A_i(t, x, u) and a right-hand side B(t, x, u).  Splitting the
system assigns each of the first n-1 gradient equations its own canonical
control field v_i = A_i grad x^i, leaving the last equation to absorb
B - sum(v_i).  Per-state quantities (the split, the cross-triples) never
sum over the state index; the alpha/beta sums are explicit loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import AngleField, DiscGrid, ScalarField

__all__ = [
    "QuasiLinearSystem",
    "SplitSystem",
    "CrossTriple",
    "split_controls",
    "cross_triple",
    "forward_residual",
]

# A matrix evaluator maps (x, y, state_values, control_values) to a 2x2 nest
# of arrays/scalars broadcastable against the grid.  Scalar states pass their
# value array; angle states pass the (cos, sin) pair of arrays.
MatrixEval = Callable[..., Sequence[Sequence[np.ndarray]]]
RhsEval = Callable[..., Sequence[np.ndarray]]


@dataclass(frozen=True)
class QuasiLinearSystem:
    """n coefficient matrices plus right-hand side; evaluators are stateless."""

    n: int
    n_controls: int
    a: tuple[MatrixEval, ...]
    b: RhsEval

    def __post_init__(self):
        if len(self.a) != self.n:
            raise ValueError("need one coefficient evaluator per state")

    def matrix(self, i: int, grid: DiscGrid, state_values, control_values) -> np.ndarray:
        """A_i on the whole grid, shape (2, 2) + grid.shape.  i is 1-based."""
        raw = self.a[i - 1](grid.X, grid.Y, state_values, control_values)
        out = np.empty((2, 2) + grid.shape)
        for b in range(2):
            for al in range(2):
                out[b, al] = np.broadcast_to(raw[b][al], grid.shape)
        if not np.all(np.isfinite(out[:, :, grid.mask])):
            raise ValueError(f"coefficient matrix A_{i} is not finite on the mask")
        return out

    def rhs(self, grid: DiscGrid, state_values, control_values) -> np.ndarray:
        raw = self.b(grid.X, grid.Y, state_values, control_values)
        out = np.empty((2,) + grid.shape)
        for b in range(2):
            out[b] = np.broadcast_to(raw[b], grid.shape)
        return out


def state_value(f):
    """What the coefficient evaluators see for a state sheet."""
    if isinstance(f, AngleField):
        return (f.c.data, f.s.data)
    if isinstance(f, ScalarField):
        return f.data
    raise TypeError("states must be ScalarField or AngleField")


def state_gradient(f, axis: int) -> ScalarField:
    return f.partial(axis)


@dataclass(frozen=True)
class SplitSystem:
    """A system plus its canonical control fields v_i, i = 1..n-1."""

    base: QuasiLinearSystem
    grid: DiscGrid
    states: tuple
    controls: tuple
    v: tuple[tuple[ScalarField, ScalarField], ...]

    def state_values(self):
        return [state_value(f) for f in self.states]

    def control_values(self):
        return [f.data for f in self.controls]


@dataclass(frozen=True)
class CrossTriple:
    """(P_i, Q_i, R_i) fields; R_i is det A_i for every i including the last."""

    p: ScalarField
    q: ScalarField
    r: ScalarField


def split_controls(sys: QuasiLinearSystem, grid: DiscGrid, states, controls=()) -> SplitSystem:
    """Manufacture canonical controls v_i = A_i grad x^i node-wise (no sum over i)."""
    if len(states) != sys.n:
        raise ValueError("state count does not match the system")
    sv = [state_value(f) for f in states]
    cv = [f.data for f in controls]
    v = []
    for i in range(1, sys.n):
        a = sys.matrix(i, grid, sv, cv)
        gx = state_gradient(states[i - 1], 1).data
        gy = state_gradient(states[i - 1], 2).data
        v1 = a[0, 0] * gx + a[0, 1] * gy
        v2 = a[1, 0] * gx + a[1, 1] * gy
        v.append((grid.field(v1), grid.field(v2)))
    return SplitSystem(base=sys, grid=grid, states=tuple(states),
                       controls=tuple(controls), v=tuple(v))


def cross_triple(split: SplitSystem, i: int) -> CrossTriple:
    """Cross-triple of state i: built from v_i for i < n, from B - sum(v) for i = n."""
    sys = split.base
    if not 1 <= i <= sys.n:
        raise ValueError(f"state index {i} out of range 1..{sys.n}")
    grid = split.grid
    sv = split.state_values()
    cv = split.control_values()
    a = sys.matrix(i, grid, sv, cv)
    if i < sys.n:
        w1 = split.v[i - 1][0].data
        w2 = split.v[i - 1][1].data
    else:
        b = sys.rhs(grid, sv, cv)
        w1 = b[0].copy()
        w2 = b[1].copy()
        for vj in split.v:
            w1 -= vj[0].data
            w2 -= vj[1].data
    p = a[0, 1] * w2 - a[1, 1] * w1
    q = a[1, 0] * w1 - a[0, 0] * w2
    r = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return CrossTriple(grid.field(p), grid.field(q), grid.field(r))


def forward_residual(sys: QuasiLinearSystem, grid: DiscGrid, states, controls=()) -> tuple[ScalarField, ScalarField]:
    """Residual of the unsplit constraint, one field per equation row.

    residual^beta = sum_i sum_alpha A_i^{beta alpha} dx^i/dt^alpha - B^beta.
    Raw (unnormalised): scaling a row of (A, B) scales its residual.
    """
    sv = [state_value(f) for f in states]
    cv = [f.data for f in controls]
    b = sys.rhs(grid, sv, cv)
    res = [-b[0], -b[1]]
    for i in range(1, sys.n + 1):
        a = sys.matrix(i, grid, sv, cv)
        gx = state_gradient(states[i - 1], 1).data
        gy = state_gradient(states[i - 1], 2).data
        res[0] = res[0] + a[0, 0] * gx + a[0, 1] * gy
        res[1] = res[1] + a[1, 0] * gx + a[1, 1] * gy
    return grid.field(res[0]), grid.field(res[1])
