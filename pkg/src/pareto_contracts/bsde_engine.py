"""
Value processes of the agents and a backward Euler scheme for BSDEs whose
coefficients are deterministic along a given state path.

In the LQ application all optimal sensitivities are constant, so the
forward representation of an agent's continuation value is a simple
Euler sum over the simulated Brownian increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lq_model import LqParams, aggregate_objective_coefficients, appetence_vector

DIVERGENCE_BOUND = 1e12


class DivergenceError(ArithmeticError):
    pass


class PicardError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass(frozen=True)
class ValueProcessSpec:
    """Forward value process ``Y_t = y0 + int driver ds + int z . dW*``.

    ``driver(t, x, z)`` is the ds-integrand (an agent's running cost at the
    imposed effort); ``z`` is the constant sensitivity vector.
    """

    y0: float
    z: tuple
    driver: Callable

    def __post_init__(self):
        if not math.isfinite(self.y0):
            raise ValueError("y0 must be finite")
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))


def forward_value_process(spec: ValueProcessSpec, grid: TimeGrid, increments,
                          x_paths=None) -> np.ndarray:
    """Euler sum of the value process on every path.

    Args:
        spec: initial value, sensitivity and drift integrand.
        grid: time grid matching the increments.
        increments: Brownian increments under the imposed effort, shape ``(paths, steps, N)``.
        x_paths: state paths ``(paths, steps + 1, N)`` passed to the driver; zeros if omitted.

    Returns:
        Array of shape ``(paths, steps + 1)``.
    """
    dw = np.asarray(increments, dtype=float)
    n_paths, n_steps, _ = dw.shape
    if n_steps != grid.n_steps:
        raise ValueError("increments do not match the time grid")
    z = np.asarray(spec.z)
    times = grid.times
    y = np.empty((n_paths, n_steps + 1))
    y[:, 0] = spec.y0
    for k in range(n_steps):
        x = None if x_paths is None else x_paths[:, k]
        drift = np.broadcast_to(np.asarray(spec.driver(times[k], x, z), dtype=float), (n_paths,))
        y[:, k + 1] = y[:, k] + drift * grid.dt + dw[:, k] @ z
    return y


def contract_from_value(y_terminal, x_terminal, agent: int, p: LqParams) -> np.ndarray:
    """Payment ``Y_T - Gamma_i . X_T`` (agents have identity utility)."""
    return np.asarray(y_terminal) - np.asarray(x_terminal) @ appetence_vector(agent, p.gamma)


def picard_iterate(initial_z, update: Callable, max_iter: int = 1000, tol: float = 1e-12):
    """Iterate ``z <- update(z)`` until successive iterates differ by less than ``tol``."""
    z = np.asarray(initial_z, dtype=float)
    for _ in range(max_iter):
        nxt = np.asarray(update(z), dtype=float)
        if not np.all(np.isfinite(nxt)):
            raise PicardError("non-finite iterate")
        if np.max(np.abs(nxt - z), initial=0.0) < tol:
            return nxt if nxt.ndim else float(nxt)
        z = nxt
    raise PicardError(f"no fixed point within {max_iter} iterations")


def terminal_gradient(terminal: Callable, x, h: float = 1e-5) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad = np.empty_like(x)
    for i in range(x.size):
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (terminal(up) - terminal(dn)) / (2 * h)
    return grad


def backward_euler_solve(terminal: Callable, driver: Callable, grid: TimeGrid, x_path=None,
                         z=None):
    """Explicit backward recursion for ``dY = -driver(t, Y, Z) dt + Z . dX``.

    ``x_path`` is a deterministic state path with ``grid.n_steps + 1`` rows
    (scalar or vector states); ``None`` means the state stays at 0. Without
    ``z`` the sensitivity is the gradient of ``terminal`` at the final state,
    which is exact for affine terminal conditions.

    Returns ``(y0, z)``.
    """
    if x_path is None:
        x_path = np.zeros(grid.n_steps + 1)
    x_path = np.asarray(x_path, dtype=float)
    if x_path.shape[0] != grid.n_steps + 1:
        raise ValueError("x_path must have n_steps + 1 rows")
    if z is None:
        x_end = np.atleast_1d(x_path[-1])
        scalar = x_path.ndim == 1
        z = terminal_gradient(lambda v: terminal(v[0] if scalar else v), x_end)
        z = float(z[0]) if scalar else z
    z_vec = np.atleast_1d(np.asarray(z, dtype=float))

    times = grid.times
    y = float(terminal(x_path[-1]))
    for k in range(grid.n_steps - 1, -1, -1):
        dx = np.atleast_1d(x_path[k + 1] - x_path[k])
        y = y + grid.dt * float(driver(times[k], y, z)) - float(z_vec @ dx)
        if not abs(y) <= DIVERGENCE_BOUND:
            raise DivergenceError(f"|y| exceeded {DIVERGENCE_BOUND:g} at step {k}")
    return y, z


def lq_optimal_aggregates(lam, p: LqParams, tol: float = 1e-13):
    """Principal-optimal Planner sensitivity ``z_lambda`` by damped gradient fixed point.

    Uses the reduced objective ``sum_j c_j u_j - d_j u_j**2``; the step
    ``1 / (4 d_j)`` halves the distance to the optimum each iteration.
    """
    c, d = aggregate_objective_coefficients(lam, p)
    c = np.array(c, dtype=float)
    d = np.array(d, dtype=float)
    step = 1 / (4 * d)
    return picard_iterate(np.zeros(2), lambda u: u + step * (c - 2 * d * u), tol=tol)
