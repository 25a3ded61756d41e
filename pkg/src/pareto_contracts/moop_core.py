"""
Generic N-agent layer: weighted Hamiltonian maximization, the Planner and Nash
BSDE drivers, and numerical checks of the growth and BMO assumptions.

Models are given as plain Python callables (see :class:`GeneralModel`); the
searches below only evaluate them pointwise, so nothing here assumes the LQ
structure. :func:`lq_general_model` wraps the two-agent LQ economy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .lq_model import LqParams

GOLDEN = (math.sqrt(5) - 1) / 2
FD_STEP = 1e-5


class ModelError(ValueError):
    """The model callables produced an unusable value."""


class FixedPointError(RuntimeError):
    """Best-response iteration did not settle within the allotted sweeps."""


@dataclass(frozen=True)
class GrowthConstants:
    """Constants of the growth assumptions and of the quadratic-BSDE well-posedness bound."""

    c: float = 1.0
    kappa: float = 1.0
    l: float = 1.0
    m: float = 1.0
    m_under: float = 1.0
    c_b: float = 0.0
    c_k: float = 1.0
    c_a: float = 1.0
    k_bmo: float = 0.01
    c_p_prime: float = 2.0

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("l must be >= 1")
        for name in ("c", "kappa", "m", "m_under", "c_k", "c_p_prime"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("c_b", "c_a", "k_bmo"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class GeneralModel:
    """Callable description of the N-agent economy.

    ``drift(t, x, a)`` returns the N-vector b; ``costs[i](t, x, col)`` is agent i's
    running cost for its column of efforts; ``appetence[i](x)`` is Gamma_i.
    """

    n_agents: int
    drift: Callable
    costs: Sequence[Callable]
    appetence: Sequence[Callable]
    agent_utility: Sequence[Callable] = ()
    agent_utility_inverse: Sequence[Callable] = ()
    liquidation: Callable = field(default=lambda x: float(np.sum(x)))
    principal_utility: Callable = field(default=lambda v: v)
    volatility: Optional[Callable] = None
    growth: Optional[GrowthConstants] = None

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if len(self.costs) != self.n_agents or len(self.appetence) != self.n_agents:
            raise ValueError("need one cost and one appetence callable per agent")

    def sigma(self, t, x) -> np.ndarray:
        if self.volatility is None:
            return np.eye(self.n_agents)
        return np.asarray(self.volatility(t, x), dtype=float)

    def weighted_cost(self, t, x, a, weights) -> float:
        return sum(w * self.costs[i](t, x, a[:, i]) for i, w in enumerate(weights))


def validate_model(gm: GeneralModel, sample: int = 200, seed: int = 0, box: float = 3.0) -> dict:
    """Sample the structural requirements on the callables; returns a name -> bool map."""
    rng = np.random.default_rng(seed)
    n = gm.n_agents
    ok = {"cost_nonnegative": True, "utility_increasing": True, "volatility_invertible": True}
    for _ in range(sample):
        t = rng.uniform(0, 1)
        x = rng.normal(size=n)
        a = rng.uniform(-box, box, size=(n, n))
        if any(gm.costs[i](t, x, a[:, i]) < 0 for i in range(n)):
            ok["cost_nonnegative"] = False
        if np.linalg.cond(gm.sigma(t, x)) >= 1e8:
            ok["volatility_invertible"] = False
    grid = np.linspace(-box, box, 41)
    for u in gm.agent_utility:
        values = np.array([u(v) for v in grid])
        if not np.all(np.diff(values) > 0):
            ok["utility_increasing"] = False
    return ok


def lq_general_model(p: LqParams, growth: Optional[GrowthConstants] = None) -> GeneralModel:
    """The two-agent LQ economy as a :class:`GeneralModel`."""
    k11, k12, k21, k22 = (float(v) for v in (p.k11, p.k12, p.k21, p.k22))
    g = float(p.gamma)

    def drift(t, x, a):
        return np.array([a[0, 0] - a[0, 1], a[1, 1] - a[1, 0]])

    def cost_1(t, x, col):
        return 0.5 * (k11 * col[0] ** 2 + k21 * col[1] ** 2)

    def cost_2(t, x, col):
        return 0.5 * (k12 * col[0] ** 2 + k22 * col[1] ** 2)

    return GeneralModel(
        n_agents=2,
        drift=drift,
        costs=(cost_1, cost_2),
        appetence=(lambda x: g * (x[0] - x[1]), lambda x: g * (x[1] - x[0])),
        agent_utility=(lambda v: v, lambda v: v),
        agent_utility_inverse=(lambda v: v, lambda v: v),
        principal_utility=lambda v: -math.exp(-p.r_p * v),
        growth=growth,
    )


def lq_growth_constants(p: LqParams, **overrides) -> GrowthConstants:
    """Growth constants satisfied by the LQ model (``l = m = m_under = 1``)."""
    k = p.k_array
    values = dict(c=max(float(k.max()), math.sqrt(2.0)), kappa=float(k.min()),
                  l=1.0, m=1.0, m_under=1.0)
    values.update(overrides)
    return GrowthConstants(**values)


def check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
        raise ValueError(f"weights must be positive and sum to 1, got {weights!r}")
    return w


# --- one-dimensional search helpers ------------------------------------------------

def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    best = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    value, x = max(best)
    return x, value


def _coordinate_polish(objective, x0: np.ndarray, a_max: float, tol: float,
                       max_sweeps: int = 200):
    x = np.array(x0, dtype=float)
    value = objective(x)
    for _ in range(max_sweeps):
        moved = 0.0
        for idx in range(x.size):
            def line(v, idx=idx):
                y = x.copy()
                y.flat[idx] = v
                return objective(y)

            v, fv = golden_section_max(line, -a_max, a_max, tol=tol)
            if fv >= value:
                moved = max(moved, abs(v - x.flat[idx]))
                x.flat[idx] = v
                value = fv
        if moved < 10 * tol:
            break
    return x, value


def _grid_start(objective, shape, grid: int, a_max: float, max_evals: int, seed: int):
    dim = int(np.prod(shape))
    axis = np.linspace(-a_max, a_max, grid)
    if grid ** dim <= max_evals:
        candidates = (np.array(c) for c in itertools.product(axis, repeat=dim))
    else:
        rng = np.random.default_rng(seed)
        candidates = iter(rng.choice(axis, size=(max_evals, dim)))
    best_x, best_v = None, -math.inf
    for c in candidates:
        x = c.reshape(shape)
        v = objective(x)
        if not math.isfinite(v):
            raise ModelError(f"non-finite objective at {x.tolist()}")
        if v > best_v:
            best_x, best_v = x, v
    return best_x


# --- Planner --------------------------------------------------------------------------

def hamiltonian_argmax(t, x, z_lambda, weights, gm: GeneralModel, grid: int = 7,
                       a_max: float = 3.0, tol: float = 1e-10, max_evals: int = 20_000,
                       seed: int = 0):
    """Maximize ``b(t, x, a) . z_lambda - sum_i w_i k^i(t, x, a[:, i])`` over the action box.

    Coarse search on ``grid`` points per coordinate (random subset beyond
    ``max_evals``), then coordinate-wise golden-section refinement.
    Returns ``(a_star, value)``.
    """
    if grid < 2:
        raise ValueError("grid must have at least two points per axis")
    w = check_weights(weights)
    z_lambda = np.asarray(z_lambda, dtype=float)
    n = gm.n_agents

    def objective(a):
        return float(np.dot(gm.drift(t, x, a), z_lambda) - gm.weighted_cost(t, x, a, w))

    start = _grid_start(objective, (n, n), grid, a_max, max_evals, seed)
    a, value = _coordinate_polish(objective, start, a_max, tol)
    if not math.isfinite(value):
        raise ModelError("non-finite Hamiltonian at the maximizer")
    return a, value


def planner_driver(t, x, z_lambda, weights, gm: GeneralModel, **search) -> float:
    return hamiltonian_argmax(t, x, z_lambda, weights, gm, **search)[1]


# --- Nash -------------------------------------------------------------------------------

@dataclass
class NashResult:
    a: np.ndarray
    iterations: int


def best_response(i: int, t, x, z, a, gm: GeneralModel, grid: int = 9, a_max: float = 3.0,
                  tol: float = 1e-10):
    """Agent i's best column given the other columns of ``a``."""
    z = np.asarray(z, dtype=float)

    def objective(col):
        trial = a.copy()
        trial[:, i] = col
        return float(np.dot(gm.drift(t, x, trial), z[:, i]) - gm.costs[i](t, x, col))

    start = _grid_start(objective, (gm.n_agents,), grid, a_max, 20_000, 0)
    return _coordinate_polish(objective, start, a_max, tol)


def nash_fixed_point(t, x, z, gm: GeneralModel, max_iter: int = 50, tol: float = 1e-7,
                     a0=None, **search) -> NashResult:
    """Gauss-Seidel best-response iteration, columns in index order.

    ``iterations`` counts the sweeps that moved some column by more than ``tol``;
    starting from an equilibrium it is 0.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    n = gm.n_agents
    a = np.zeros((n, n)) if a0 is None else np.array(a0, dtype=float)
    for sweep in range(max_iter):
        moved = 0.0
        for i in range(n):
            col, _ = best_response(i, t, x, z, a, gm, **search)
            moved = max(moved, float(np.max(np.abs(col - a[:, i]))))
            a[:, i] = col
        if moved < tol:
            return NashResult(a, sweep)
    raise FixedPointError(f"no best-response fixed point after {max_iter} sweeps")


def nash_driver(t, x, z, gm: GeneralModel, a_nash=None, **search) -> np.ndarray:
    """Per-agent driver ``b(a_NA) . z[:, i] - k^i(a_NA[:, i])`` at the Nash fixed point."""
    z = np.asarray(z, dtype=float)
    if a_nash is None:
        a_nash = nash_fixed_point(t, x, z, gm, **search).a
    b = gm.drift(t, x, a_nash)
    return np.array([b @ z[:, i] - gm.costs[i](t, x, a_nash[:, i]) for i in range(gm.n_agents)])


# --- assumption checks ----------------------------------------------------------------------

def condition_a1(gc: GrowthConstants):
    """Exponent condition; returns ``(ratio_1, ratio_2, holds)`` or raises when ill-posed."""
    den = gc.m_under + 1 - gc.l
    if den <= 0:
        raise ValueError("m_under + 1 - l must be > 0 for the exponent condition")
    r1 = (gc.l + gc.m) / den
    r2 = (gc.m_under + 2 - gc.l) / den
    return r1, r2, max(r1, r2) <= 2


def _central_gradient(f, v: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    grad = np.empty_like(v)
    for idx in range(v.size):
        up, dn = v.copy(), v.copy()
        up[idx] += h
        dn[idx] -= h
        grad[idx] = (f(up) - f(dn)) / (2 * h)
    return grad


@dataclass
class GrowthReport:
    condition_a1: Optional[bool]
    ratios: Optional[tuple]
    bounds: dict
    ill_posed: bool = False

    @property
    def passed(self) -> bool:
        return bool(self.condition_a1) and all(ok for ok, _ in self.bounds.values())

    def to_dict(self) -> dict:
        return {
            "condition_a1": self.condition_a1,
            "ratios": list(self.ratios) if self.ratios else None,
            "ill_posed": self.ill_posed,
            "bounds": {name: {"passed": ok, "worst_margin": margin}
                       for name, (ok, margin) in self.bounds.items()},
        }


def check_growth_conditions(gc: GrowthConstants, gm: GeneralModel, sample: int = 1000,
                            seed: int = 0, scale: float = 10.0) -> GrowthReport:
    """Condition on the exponents plus sampled checks of the drift and cost bounds.

    Each bound is reported with its worst sampled margin (bound minus value,
    normalised by the bound); a bound passes when that margin is >= -1e-8.
    """
    try:
        r1, r2, holds = condition_a1(gc)
        ratios, ill_posed = (r1, r2), False
    except ValueError:
        ratios, holds, ill_posed = None, False, True

    rng = np.random.default_rng(seed)
    n = gm.n_agents
    worst = {"drift_growth": math.inf, "cost_nonnegative": math.inf,
             "cost_growth": math.inf, "cost_gradient_coercive": math.inf}
    for _ in range(sample):
        t = rng.uniform(0, 1)
        x = rng.normal(size=n) * scale * rng.uniform()
        a = rng.normal(size=(n, n)) * scale * rng.uniform()
        x_norm = float(np.linalg.norm(x))
        b = np.asarray(gm.drift(t, x, a), dtype=float)
        a_norm = float(np.linalg.norm(a))
        bound = gc.c * (1 + x_norm + a_norm)
        worst["drift_growth"] = min(worst["drift_growth"], float(np.min(bound - np.abs(b))) / bound)
        for i in range(n):
            col = a[:, i]
            col_norm = float(np.linalg.norm(col))
            k = gm.costs[i](t, x, col)
            worst["cost_nonnegative"] = min(worst["cost_nonnegative"], k)
            kb = gc.c * (1 + x_norm + col_norm ** (gc.l + gc.m))
            worst["cost_growth"] = min(worst["cost_growth"], (kb - k) / kb)
            grad = _central_gradient(lambda c: gm.costs[i](t, x, c), col)
            lower = gc.kappa * col_norm ** gc.m_under
            if lower > 0:
                worst["cost_gradient_coercive"] = min(
                    worst["cost_gradient_coercive"], (float(np.linalg.norm(grad)) - lower) / lower)
    bounds = {name: (bool(margin >= -1e-8), float(margin)) for name, margin in worst.items()}
    return GrowthReport(None if ill_posed else holds, ratios, bounds, ill_posed)


def lemma_b1_constant(gc: GrowthConstants, n: int) -> float:
    """Constant C_f bounding the x-gradient of the Nash driver by ``C_f (1 + |z|^2)``."""
    if gc.l + gc.m > 2 * (gc.m_under - 1 + gc.l):
        raise ValueError(
            f"requires l + m <= 2 (m_under - 1 + l); got {gc.l + gc.m} > {2 * (gc.m_under - 1 + gc.l)}")
    return gc.c_b + 2 * gc.c * gc.c_a + 2 * gc.c_k * n * (1 + gc.c_a ** (gc.l + gc.m - 1) * (1 + gc.c_a))


def check_bmo_condition(gc: GrowthConstants, c_f: float) -> bool:
    return gc.k_bmo * c_f * gc.c_p_prime < 0.5
