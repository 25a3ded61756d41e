"""
Closed forms for the two-agent, two-project linear-quadratic contracting model.

Conventions
-----------
Matrices are indexed ``m[j, i]`` = entry (j+1, i+1): row = project, column = agent.

* ``k[j][i]`` is the cost coefficient of agent i's effort on project j, so the
  usual test economy reads ``k = [[2, 1], [10, 5]]`` (k11=2, k12=1, k21=10, k22=5).
* ``z[j, i]`` is the loading of agent i's contract on the terminal value of project j.
* ``a[j, i]`` is the effort of agent i on project j.

Output dynamics are ``dX = b(a) dt + dW`` with ``b(a) = (a11 - a12, a22 - a21)``;
agents are risk neutral and the Principal has CARA utility with coefficient ``r_p``.

Scalar closed forms are written with plain arithmetic so that they also accept
``fractions.Fraction`` inputs and return exact results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

MODES = ("pareto", "cooperative", "nash")


@dataclass(frozen=True)
class LqParams:
    """Parameters of the bidimensional LQ economy.

    Args:
        k: row-major 2x2 cost matrix ``[[k11, k12], [k21, k22]]``, all entries > 0.
        r_p: Principal risk aversion (>= 0).
        gamma: appetence coefficient (>= 0).
        horizon: contract maturity T (> 0).
        r0: reservation utilities of agents 1 and 2.
        a_max: half-width of the action box used by brute-force searches.
    """

    k: tuple = ((2.0, 1.0), (10.0, 5.0))
    r_p: float = 1.0
    gamma: float = 0.0
    horizon: float = 1.0
    r0: tuple = (0.0, 0.0)
    a_max: float = 3.0

    def __post_init__(self):
        k = tuple(tuple(row) for row in self.k)
        if len(k) != 2 or any(len(row) != 2 for row in k):
            raise ValueError(f"k must be 2x2, got {self.k!r}")
        if not all(v > 0 for row in k for v in row):
            raise ValueError(f"all cost coefficients must be > 0, got {k!r}")
        r0 = tuple(self.r0)
        if len(r0) != 2:
            raise ValueError(f"r0 must have two entries, got {self.r0!r}")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.gamma < 0 or self.r_p < 0:
            raise ValueError("gamma and r_p must be >= 0")
        if not self.a_max > 0:
            raise ValueError("a_max must be > 0")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "r0", r0)

    @property
    def k11(self):
        return self.k[0][0]

    @property
    def k12(self):
        return self.k[0][1]

    @property
    def k21(self):
        return self.k[1][0]

    @property
    def k22(self):
        return self.k[1][1]

    @property
    def k_array(self) -> np.ndarray:
        return np.array(self.k, dtype=float)

    def replace(self, **changes) -> "LqParams":
        values = dict(k=self.k, r_p=self.r_p, gamma=self.gamma, horizon=self.horizon,
                      r0=self.r0, a_max=self.a_max)
        values.update(changes)
        return LqParams(**values)


@dataclass(frozen=True)
class LinearContract:
    """Terminal payment ``intercept + loading . X_T``."""

    intercept: float
    loading: tuple

    def __post_init__(self):
        loading = tuple(float(v) for v in self.loading)
        if len(loading) != 2 or not all(math.isfinite(v) for v in loading):
            raise ValueError(f"loading must be two finite reals, got {self.loading!r}")
        if not math.isfinite(self.intercept):
            raise ValueError("intercept must be finite")
        object.__setattr__(self, "loading", loading)

    def pay(self, x_terminal):
        """Payment for terminal states of shape ``(..., 2)``."""
        x_terminal = np.asarray(x_terminal, dtype=float)
        return self.intercept + x_terminal @ np.asarray(self.loading)


@dataclass
class SolveReport:
    mode: str
    z_star: np.ndarray
    a_star: np.ndarray
    g_value: float
    principal_value: Optional[float]
    contracts: tuple
    lam: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "lambda": self.lam,
            "z_star": self.z_star.tolist(),
            "a_star": self.a_star.tolist(),
            "g_value": self.g_value,
            "principal_value": self.principal_value,
            "contracts": [
                {"agent": i + 1, "intercept": c.intercept, "loading": list(c.loading)}
                for i, c in enumerate(self.contracts)
            ],
        }
        out.update(self.extra)
        return out


def _check_lambda(lam) -> None:
    if not 0 < lam < 1:
        raise ValueError(f"Pareto weight must lie strictly inside (0, 1), got {lam}")


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


# --- primitives --------------------------------------------------------------

def drift_lq(a) -> np.ndarray:
    """Drift ``(a11 - a12, a22 - a21)``; accepts stacked actions ``(..., 2, 2)``."""
    a = np.asarray(a, dtype=float)
    return np.stack([a[..., 0, 0] - a[..., 0, 1], a[..., 1, 1] - a[..., 1, 0]], axis=-1)


def cost_lq(a, p: LqParams) -> np.ndarray:
    """Per-agent running cost; component i only involves column i of ``a``."""
    a = np.asarray(a, dtype=float)
    k = p.k_array
    return 0.5 * np.stack(
        [k[0, 0] * a[..., 0, 0] ** 2 + k[1, 0] * a[..., 1, 0] ** 2,
         k[1, 1] * a[..., 1, 1] ** 2 + k[0, 1] * a[..., 0, 1] ** 2],
        axis=-1,
    )


def appetence_vector(agent: int, gamma: float) -> np.ndarray:
    """``Gamma_i`` such that the appetence term is ``Gamma_i . X_T``."""
    sign = 1.0 if agent == 0 else -1.0
    return gamma * np.array([sign, -sign])


def z_aggregates(z, lam) -> np.ndarray:
    """Per-project aggregates ``lam * z[j, 0] + (1 - lam) * z[j, 1]``."""
    z = _as_matrix(z)
    return lam * z[:, 0] + (1 - lam) * z[:, 1]


def a_star_from_aggregates(agg, lam, p: LqParams) -> np.ndarray:
    lb = 1 - lam
    return np.array([
        [agg[0] / (lam * p.k11), -agg[0] / (lb * p.k12)],
        [-agg[1] / (lam * p.k21), agg[1] / (lb * p.k22)],
    ])


def a_star_lq(z, lam, p: LqParams) -> np.ndarray:
    """Planner's effort maximizing ``b(a).z_lam - lam k^1 - (1-lam) k^2``."""
    _check_lambda(lam)
    return a_star_from_aggregates(z_aggregates(z, lam), lam, p)


def nash_actions(z, p: LqParams) -> np.ndarray:
    """Nash effort ``e*(z)``; each agent best-responds to its own column of z."""
    z = _as_matrix(z)
    return np.array([
        [z[0, 0] / p.k11, -z[0, 1] / p.k12],
        [-z[1, 0] / p.k21, z[1, 1] / p.k22],
    ])


# --- Principal's certainty-equivalent rates -----------------------------------

def g_planner(lam, z, p: LqParams) -> float:
    """Principal's rate ``g(lam, z)`` under a Planner imposing weight ``lam``."""
    _check_lambda(lam)
    z = _as_matrix(z)
    lb = 1 - lam
    u1 = lam * z[0, 0] + lb * z[0, 1]
    u2 = lam * z[1, 0] + lb * z[1, 1]
    penalty = -0.5 * p.r_p * ((z[0, 0] + z[0, 1] - 1) ** 2 + (z[1, 1] + z[1, 0] - 1) ** 2)
    linear = (u1 / (lam * p.k11) + u1 / (lb * p.k12)) + (u2 / (lb * p.k22) + u2 / (lam * p.k21))
    quad = (p.k11 / 2 * (u1 / (lam * p.k11)) ** 2 + p.k21 / 2 * (u2 / (lam * p.k21)) ** 2
            + p.k22 / 2 * (u2 / (lb * p.k22)) ** 2 + p.k12 / 2 * (u1 / (lb * p.k12)) ** 2)
    return float(penalty + linear - quad)


def g_na(z, p: LqParams, r_p: Optional[float] = None) -> float:
    """Principal's rate ``g_NA(z, R)`` when agents play the Nash equilibrium."""
    z = _as_matrix(z)
    r = p.r_p if r_p is None else r_p
    penalty = -0.5 * r * ((z[0, 0] + z[0, 1] - 1) ** 2 + (z[1, 1] + z[1, 0] - 1) ** 2)
    linear = z[0, 0] / p.k11 + z[0, 1] / p.k12 + z[1, 0] / p.k21 + z[1, 1] / p.k22
    quad = (z[0, 0] ** 2 / (2 * p.k11) + z[1, 0] ** 2 / (2 * p.k21)
            + z[1, 1] ** 2 / (2 * p.k22) + z[0, 1] ** 2 / (2 * p.k12))
    return float(penalty + linear - quad)


def aggregate_objective_coefficients(lam, p: LqParams):
    """Coefficients of the reduced objective ``sum_j c_j u_j - d_j u_j**2``.

    On the unit-row-sum set, ``g(lam, z)`` only depends on the aggregates
    ``u = z_aggregates(z, lam)`` through this separable concave quadratic.
    """
    lb = 1 - lam
    c = (1 / (lam * p.k11) + 1 / (lb * p.k12), 1 / (lb * p.k22) + 1 / (lam * p.k21))
    d = (1 / (2 * lam ** 2 * p.k11) + 1 / (2 * lb ** 2 * p.k12),
         1 / (2 * lb ** 2 * p.k22) + 1 / (2 * lam ** 2 * p.k21))
    return c, d


def pareto_aggregates(lam, p: LqParams):
    """Optimal aggregates; well defined on the whole open interval, including 1/2."""
    _check_lambda(lam)
    lb = 1 - lam
    u1 = lam * lb * (lam * p.k11 + lb * p.k12) / (lam ** 2 * p.k11 + lb ** 2 * p.k12)
    u2 = lam * lb * (lam * p.k21 + lb * p.k22) / (lam ** 2 * p.k21 + lb ** 2 * p.k22)
    return u1, u2


def g_pareto_value(lam, p: LqParams):
    """``g(lam, z_Pe)`` (or ``g(0.5)`` at the cooperative weight), computed in reduced form."""
    c, d = aggregate_objective_coefficients(lam, p)
    return c[0] ** 2 / (4 * d[0]) + c[1] ** 2 / (4 * d[1])


def cooperative_value(p: LqParams):
    """``g(0.5)``: total first-best surplus rate."""
    return 1 / (2 * p.k11) + 1 / (2 * p.k12) + 1 / (2 * p.k22) + 1 / (2 * p.k21)


def weak_pareto_values(p: LqParams):
    """Continuous extensions ``(g(0), g(1))`` of the Pareto curve at the boundary weights."""
    return 1 / (2 * p.k11) + 1 / (2 * p.k21), 1 / (2 * p.k22) + 1 / (2 * p.k12)


# --- optimal sensitivities -----------------------------------------------------

def z_pareto(lam, p: LqParams) -> np.ndarray:
    """Principal-optimal loadings for an exogenous weight ``lam != 1/2``."""
    _check_lambda(lam)
    if lam == 0.5:
        raise ValueError("lam = 1/2 is the cooperative case: use z_cooperative")
    lb = 1 - lam
    den1 = lam ** 2 * p.k11 + lb ** 2 * p.k12
    den2 = lam ** 2 * p.k21 + lb ** 2 * p.k22
    return np.array([
        [lb ** 2 * p.k12 / den1, lam ** 2 * p.k11 / den1],
        [lb ** 2 * p.k22 / den2, lam ** 2 * p.k21 / den2],
    ], dtype=float)


def z_cooperative(p: LqParams, representative: Optional[Sequence[float]] = None) -> np.ndarray:
    """A member of the one-parameter family of optimal loadings at ``lam = 1/2``.

    ``representative = (z11, z21)`` fixes agent 1's column; agent 2 receives the
    complement so that both rows sum to one. Without it, the continuity limit of
    ``z_pareto`` at 1/2 is returned.
    """
    if representative is None:
        z11 = p.k12 / (p.k11 + p.k12)
        z21 = p.k22 / (p.k21 + p.k22)
    else:
        z11, z21 = (float(v) for v in representative)
    return np.array([[z11, 1 - z11], [z21, 1 - z21]], dtype=float)


def z_nash(p: LqParams, r_p: Optional[float] = None) -> np.ndarray:
    r = p.r_p if r_p is None else r_p
    den1 = 1 + r * (p.k12 + p.k11)
    den2 = 1 + r * (p.k21 + p.k22)
    return np.array([
        [(1 + r * p.k12) / den1, (1 + r * p.k11) / den1],
        [(1 + r * p.k22) / den2, (1 + r * p.k21) / den2],
    ], dtype=float)


def g_na_limit(p: LqParams):
    """Limit of ``g_NA(z_NA(R), R)`` as the Principal's risk aversion goes to infinity."""
    s1 = p.k11 + p.k12
    s2 = p.k22 + p.k21
    return (p.k12 / s1 / p.k11 * (1 - p.k12 / (2 * s1))
            + p.k11 / s1 / p.k12 * (1 - p.k11 / (2 * s1))
            + p.k22 / s2 / p.k21 * (1 - p.k22 / (2 * s2))
            + p.k21 / s2 / p.k22 * (1 - p.k21 / (2 * s2)))


def g_na_at_optimum(p: LqParams, r_p: Optional[float] = None) -> float:
    r = p.r_p if r_p is None else r_p
    return g_na(z_nash(p, r), p, r)


# --- contracts -----------------------------------------------------------------

def contract_for(z, a, agent: int, p: LqParams) -> LinearContract:
    """Contract of ``agent`` with sensitivity column ``z[:, agent]`` under effort ``a``.

    Intercept saturates the reservation utility: the agent's expected utility
    under ``a`` is exactly ``r0[agent]``.
    """
    z = _as_matrix(z)
    a = _as_matrix(a)
    T = p.horizon
    col = z[:, agent]
    intercept = (p.r0[agent] + T * float(cost_lq(a, p)[agent])
                 - T * float(col @ drift_lq(a)))
    loading = col - appetence_vector(agent, p.gamma)
    return LinearContract(float(intercept), tuple(loading))


def contracts_pareto(lam, p: LqParams, representative=None) -> tuple:
    """Optimal contracts when the Planner imposes weight ``lam``.

    At ``lam == 0.5`` the cooperative family is used, with ``representative``
    selecting one of its members (see :func:`z_cooperative`).
    """
    _check_lambda(lam)
    z = z_cooperative(p, representative) if lam == 0.5 else z_pareto(lam, p)
    a = a_star_lq(z, lam, p)
    return contract_for(z, a, 0, p), contract_for(z, a, 1, p)


def contracts_nash(p: LqParams) -> tuple:
    z = z_nash(p)
    a = nash_actions(z, p)
    return contract_for(z, a, 0, p), contract_for(z, a, 1, p)


# --- utilities -------------------------------------------------------------------

def agent_utility_analytic(c: LinearContract, a, agent: int, p: LqParams) -> float:
    """Expected utility of a risk-neutral agent under a constant effort ``a``."""
    a = _as_matrix(a)
    mean_x = p.horizon * drift_lq(a)
    weights = np.asarray(c.loading) + appetence_vector(agent, p.gamma)
    return float(c.intercept + weights @ mean_x - p.horizon * cost_lq(a, p)[agent])


def optimal_g(mode: str, p: LqParams, lam=None) -> float:
    if mode == "cooperative":
        return float(cooperative_value(p))
    if mode == "nash":
        return g_na_at_optimum(p)
    if mode == "pareto":
        if lam is None:
            raise ValueError("pareto mode needs a weight")
        return g_planner(lam, z_pareto(lam, p), p)
    raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")


def principal_value_analytic(mode: str, p: LqParams, lam=None) -> float:
    """``-exp(-R_P T g*)`` for the requested regime (zero reservation utilities)."""
    if p.r_p == 0:
        raise ValueError("r_p = 0: the exponential value degenerates, use the g-value instead")
    return -math.exp(-p.r_p * p.horizon * optimal_g(mode, p, lam))


def solve(mode: str, p: LqParams, lam=None, representative=None,
          principal_value: bool = True) -> SolveReport:
    if mode == "pareto":
        if lam is None:
            raise ValueError("pareto mode needs a weight")
        _check_lambda(lam)
        if lam == 0.5:
            raise ValueError("lam = 1/2 is the cooperative case: use mode 'cooperative'")
        z = z_pareto(lam, p)
        a = a_star_lq(z, lam, p)
    elif mode == "cooperative":
        lam = 0.5
        z = z_cooperative(p, representative)
        a = a_star_lq(z, lam, p)
    elif mode == "nash":
        lam = None
        z = z_nash(p)
        a = nash_actions(z, p)
    else:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    g = optimal_g(mode, p, lam)
    pv = None
    if principal_value:
        pv = -math.exp(-p.r_p * p.horizon * g) if p.r_p > 0 else None
        if pv is None:
            raise ValueError("r_p = 0: the exponential value degenerates, use the g-value instead")
    contracts = (contract_for(z, a, 0, p), contract_for(z, a, 1, p))
    return SolveReport(mode, z, a, g, pv, contracts, lam)


# --- Nash versus Pareto ------------------------------------------------------------

def nash_pareto_candidate(p: LqParams):
    """Weight forced by the ratio condition, with the two ratios it is built from.

    Returns ``(lam, ratio_1, ratio_2)`` where ``lam = 1 / (1 + ratio_1)``.
    """
    r = p.r_p
    ratio_1 = (1 + r * p.k12) / (1 + r * p.k11)
    ratio_2 = (1 + r * p.k22) / (1 + r * p.k21)
    return 1 / (1 + ratio_1), ratio_1, ratio_2


def nash_pareto_residuals(lam, p: LqParams):
    """Residuals of the three conditions under which ``e*(z_NA)`` equals ``a*(z_Pe(lam), lam)``."""
    zn = z_nash(p)
    u1, u2 = pareto_aggregates(lam, p)
    _, ratio_1, ratio_2 = nash_pareto_candidate(p)
    odds = (1 - lam) / lam
    return (zn[0, 0] - u1 / lam,
            zn[1, 0] - u2 / lam,
            max(abs(ratio_1 - odds), abs(ratio_2 - odds)))


def nash_pareto_check(p: LqParams, tol: float = 1e-9) -> Optional[float]:
    """Weight at which the Nash effort is a Pareto optimum, or None."""
    if not tol > 0:
        raise ValueError("tol must be > 0")
    lam, _, _ = nash_pareto_candidate(p)
    if not 0 < lam < 1:
        return None
    if all(abs(r) <= tol for r in nash_pareto_residuals(lam, p)):
        return lam
    return None


# --- Planner improvement set --------------------------------------------------------

def _is_unimodal(values: np.ndarray) -> bool:
    steps = np.sign(np.diff(values))
    steps = steps[steps != 0]
    if steps.size == 0:
        return True
    changes = np.count_nonzero(np.diff(steps))
    return changes == 0 or (changes == 1 and steps[0] > 0)


def lambda_improvement_set(p: LqParams, tol: float = 1e-10, r_p: Optional[float] = None):
    """Weights for which adding a Planner weakly improves the Principal's value.

    Returns a list of ``(lo, hi)`` intervals inside (0, 1) with endpoints located
    to ``tol`` in the weight.
    """
    r = p.r_p if r_p is None else r_p
    if r == 0:
        raise ValueError("r_p = 0: compare g-values directly")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    target = g_na_at_optimum(p, r)

    def excess(lam):
        return g_pareto_value(lam, p) - target

    scan = np.linspace(0, 1, 401)[1:-1]
    values = np.array([excess(x) for x in scan])
    if not _is_unimodal(values):
        scan = np.linspace(0, 1, 10_001)[1:-1]
        values = np.array([excess(x) for x in scan])

    intervals = []
    inside = values >= 0
    lo = None
    for i, flag in enumerate(inside):
        if flag and lo is None:
            lo = 0.0 if i == 0 else brentq(excess, scan[i - 1], scan[i], xtol=tol)
        if not flag and lo is not None:
            hi = brentq(excess, scan[i - 1], scan[i], xtol=tol)
            intervals.append((float(lo), float(hi)))
            lo = None
    if lo is not None:
        intervals.append((float(lo), 1.0))
    return intervals


# --- Figure data ----------------------------------------------------------------------

def _series_label(r) -> str:
    return f"g_na_R={float(r):g}"


@dataclass
class Figure1Table:
    lambdas: np.ndarray
    g_values: np.ndarray
    weak: tuple
    na_values: dict

    def rows(self):
        """Long-format ``(series, x, y)`` rows sorted by series then x."""
        rows = [("g_pareto", float(x), float(y)) for x, y in zip(self.lambdas, self.g_values)]
        rows.append(("g_weak_0", 0.0, float(self.weak[0])))
        rows.append(("g_weak_1", 1.0, float(self.weak[1])))
        xs = [0.0, *map(float, self.lambdas), 1.0]
        for label, value in self.na_values.items():
            rows.extend((label, x, float(value)) for x in xs)
        return sorted(rows, key=lambda row: (row[0], row[1]))


def figure1_data(p: LqParams, r_list=(0.1, 0.25, 0.5, 1, 50), grid_size: int = 99) -> Figure1Table:
    """Pareto curve on a uniform open grid, weak endpoints and one Nash level per R."""
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    lambdas = np.arange(1, grid_size + 1) / (grid_size + 1)
    g_values = np.array([g_pareto_value(float(lam), p) for lam in lambdas])
    na_values = {}
    for r in r_list:
        if not r > 0:
            raise ValueError(f"risk aversions must be > 0, got {r}")
        na_values[_series_label(r)] = g_na_at_optimum(p, r)
    return Figure1Table(lambdas, g_values, weak_pareto_values(p), na_values)
