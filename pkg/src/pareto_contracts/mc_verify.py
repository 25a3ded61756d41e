"""
Monte Carlo estimation and brute-force certification at desk scale.

Paths are simulated directly under the probability induced by the imposed
effort, so the drift is added and the increments are plain Gaussian draws.
Random numbers come from counter-based Philox streams keyed by the seed, one
stream per fixed-size block of paths: a path's increments depend only on
``(seed, path index)``, whatever the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .bsde_engine import TimeGrid
from .lq_model import (LinearContract, LqParams, agent_utility_analytic, appetence_vector,
                       cost_lq, drift_lq)

BLOCK_PATHS = 4096
THREADS_ENV = "PARETO_CONTRACTS_THREADS"
# coefficient of a[j, i] in b_j(a): b1 = a11 - a12, b2 = a22 - a21
DRIFT_SIGN = np.array([[1.0, -1.0], [-1.0, 1.0]])


def worker_count(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, os.cpu_count() or 1))
    return max(1, int(threads))


def _map(fn, items, threads):
    n = worker_count(threads)
    if n == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def block_increments(seed: int, block: int, n_paths: int, n_steps: int, dt: float) -> np.ndarray:
    """Gaussian increments for one block of paths, shape ``(n_paths, n_steps, 2)``."""
    bitgen = np.random.Philox(key=seed & (2 ** 64 - 1), counter=[0, 0, block, 0])
    return np.random.Generator(bitgen).standard_normal((n_paths, n_steps, 2)) * math.sqrt(dt)


@dataclass
class PathEnsemble:
    grid: TimeGrid
    n_paths: int
    seed: int
    increments: np.ndarray
    x_paths: np.ndarray
    action: Optional[np.ndarray] = None

    @property
    def x_terminal(self) -> np.ndarray:
        return self.x_paths[:, -1]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int

    def within(self, target: float, n_se: float, floor: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.std_error + floor

    def z_score(self, target: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == target else math.copysign(math.inf, self.mean - target)
        return (self.mean - target) / self.std_error


def estimate(samples) -> McEstimate:
    """Sample mean and standard error; exactly rounded sums, so order does not matter."""
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    mean = math.fsum(samples) / n
    var = math.fsum((samples - mean) ** 2) / (n - 1) if n > 1 else 0.0
    return McEstimate(mean, math.sqrt(var / n), n)


def simulate_paths(a: Union[np.ndarray, Callable], p: LqParams, grid: TimeGrid, n_paths: int,
                   seed: int = 42, threads: Optional[int] = None) -> PathEnsemble:
    """Euler scheme ``X_{k+1} = X_k + b(a) dt + dW_k`` from ``X_0 = 0``.

    ``a`` is a constant 2x2 action or a policy ``a(t, x) -> (n, 2, 2)`` evaluated
    on the current states.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    constant = not callable(a)
    blocks = [(b, min(BLOCK_PATHS, n_paths - b * BLOCK_PATHS))
              for b in range(math.ceil(n_paths / BLOCK_PATHS))]
    chunks = _map(lambda bl: block_increments(seed, bl[0], bl[1], grid.n_steps, grid.dt),
                  blocks, threads)
    dw = np.concatenate(chunks, axis=0)

    x = np.zeros((n_paths, grid.n_steps + 1, 2))
    if constant:
        action = np.asarray(a, dtype=float)
        step_drift = drift_lq(action) * grid.dt
        for k in range(grid.n_steps):
            x[:, k + 1] = x[:, k] + step_drift + dw[:, k]
    else:
        action = None
        for k, t in enumerate(grid.times[:-1]):
            x[:, k + 1] = x[:, k] + drift_lq(a(t, x[:, k])) * grid.dt + dw[:, k]
    return PathEnsemble(grid, n_paths, seed, dw, x, action)


def _check_policy(ens: PathEnsemble, a) -> None:
    if ens.action is None or not np.array_equal(ens.action, np.asarray(a, dtype=float)):
        raise ValueError("ensemble was not simulated under this action")


def mc_agent_utility(ens: PathEnsemble, c: LinearContract, agent: int, a, p: LqParams) -> McEstimate:
    _check_policy(ens, a)
    x_t = ens.x_terminal
    gains = c.pay(x_t) + x_t @ appetence_vector(agent, p.gamma)
    return estimate(gains - p.horizon * float(cost_lq(np.asarray(a, dtype=float), p)[agent]))


def mc_principal_utility(ens: PathEnsemble, contracts, p: LqParams) -> McEstimate:
    if p.r_p == 0:
        raise ValueError("r_p = 0: the exponential utility degenerates")
    x_t = ens.x_terminal
    profit = x_t.sum(axis=1) - contracts[0].pay(x_t) - contracts[1].pay(x_t)
    return estimate(-np.exp(-p.r_p * profit))


# --- brute-force certificates --------------------------------------------------------------

@dataclass
class Certificate:
    passed: bool
    witness: Optional[np.ndarray]
    improvement: Optional[tuple]
    n_checked: int
    agent: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "witness": None if self.witness is None else self.witness.tolist(),
            "improvement": None if self.improvement is None else list(self.improvement),
            "agent": None if self.agent is None else self.agent + 1,
            "n_checked": self.n_checked,
        }


def action_axis(a_max: float, resolution: float) -> np.ndarray:
    n = int(round(2 * a_max / resolution))
    if n < 1:
        return np.zeros(1)
    return np.linspace(-a_max, a_max, n + 1)


def _entry_terms(c: LinearContract, agent: int, p: LqParams, axis: np.ndarray):
    """Utility of ``agent`` split into one term per action entry.

    Returns ``(constant, terms)`` where ``terms[j][i]`` is evaluated on ``axis``
    for entry ``a[j, i]``; the utility is ``constant + sum of the four terms``.
    """
    T = p.horizon
    w = np.asarray(c.loading) + appetence_vector(agent, p.gamma)
    k = p.k_array
    terms = [[None, None], [None, None]]
    for j in range(2):
        for i in range(2):
            cost = 0.5 * k[j, i] * axis ** 2 if i == agent else np.zeros_like(axis)
            terms[j][i] = T * (w[j] * DRIFT_SIGN[j, i] * axis - cost)
    return float(c.intercept), terms


def certify_pareto(a_candidate, contracts, p: LqParams, resolution: float = 0.05,
                   tol: float = 1e-9, threads: Optional[int] = None) -> Certificate:
    """Scan the action grid for an action that Pareto-dominates ``a_candidate``.

    Dominance: both agents at least as well off (up to ``tol``) and one better
    off by more than ``tol``, using exact risk-neutral expected utilities.
    """
    a_candidate = np.asarray(a_candidate, dtype=float)
    base = np.array([agent_utility_analytic(contracts[i], a_candidate, i, p) for i in range(2)])
    axis = action_axis(p.a_max, resolution)
    split = [_entry_terms(contracts[i], i, p, axis) for i in range(2)]
    # u[i] over the (a12, a21, a22) cube plus a per-a11 offset
    cubes = []
    for i in range(2):
        const, t = split[i]
        cube = (t[0][1][:, None, None] + t[1][0][None, :, None] + t[1][1][None, None, :]) + const
        cubes.append((cube - base[i], t[0][0]))

    def scan(idx):
        d1 = cubes[0][0] + cubes[0][1][idx]
        d2 = cubes[1][0] + cubes[1][1][idx]
        dom = (d1 >= -tol) & (d2 >= -tol) & ((d1 > tol) | (d2 > tol))
        if not dom.any():
            return None
        gain = np.where(dom, d1 + d2, -np.inf)
        flat = int(np.argmax(gain))
        return float(gain.flat[flat]), idx, np.unravel_index(flat, gain.shape), \
            (float(d1.flat[flat]), float(d2.flat[flat]))

    hits = [h for h in _map(scan, range(axis.size), threads) if h is not None]
    n_checked = axis.size ** 4
    if not hits:
        return Certificate(True, None, None, n_checked)
    _, i11, (i12, i21, i22), improvement = max(hits, key=lambda h: (h[0], -h[1]))
    witness = np.array([[axis[i11], axis[i12]], [axis[i21], axis[i22]]])
    return Certificate(False, witness, improvement, n_checked)


def certify_nash(a_candidate, contracts, p: LqParams, resolution: float = 0.05,
                 tol: float = 1e-9) -> Certificate:
    """Scan every unilateral column deviation on the grid for a profitable one."""
    a_candidate = np.asarray(a_candidate, dtype=float)
    axis = action_axis(p.a_max, resolution)
    n_checked = 0
    best = None
    for agent in range(2):
        const, t = _entry_terms(contracts[agent], agent, p, axis)
        base = agent_utility_analytic(contracts[agent], a_candidate, agent, p)
        # the other agent's column stays at the candidate
        frozen = _frozen_terms(contracts[agent], agent, a_candidate, p)
        util = const + frozen + t[0][agent][:, None] + t[1][agent][None, :]
        gain = util - base
        n_checked += gain.size
        flat = int(np.argmax(gain))
        if gain.flat[flat] > tol and (best is None or gain.flat[flat] > best[0]):
            i0, i1 = np.unravel_index(flat, gain.shape)
            dev = a_candidate.copy()
            dev[:, agent] = (axis[i0], axis[i1])
            best = (float(gain.flat[flat]), agent, dev)
    if best is None:
        return Certificate(True, None, None, n_checked)
    gain, agent, dev = best
    return Certificate(False, dev, (gain,), n_checked, agent)


def _frozen_terms(c: LinearContract, agent: int, a, p: LqParams) -> float:
    """Part of ``agent``'s utility driven by the other agent's (fixed) column."""
    other = 1 - agent
    T = p.horizon
    w = np.asarray(c.loading) + appetence_vector(agent, p.gamma)
    return float(sum(T * w[j] * DRIFT_SIGN[j, other] * a[j, other] for j in range(2)))
