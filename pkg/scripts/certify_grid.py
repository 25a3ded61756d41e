"""Brute-force certificates on a sweep of Planner weights, plus the Nash effort.

Usage: python scripts/certify_grid.py [resolution]
"""

import sys
import time

import numpy as np

from pareto_contracts.lq_model import (LqParams, a_star_lq, contracts_nash, contracts_pareto,
                                       nash_actions, z_nash, z_pareto)
from pareto_contracts.mc_verify import certify_nash, certify_pareto


def main(resolution="0.05"):
    res = float(resolution)
    p = LqParams(k=[[2, 1], [10, 5]], r_p=1.0)
    for lam in np.linspace(0.1, 0.9, 9):
        if abs(lam - 0.5) < 1e-12:
            continue
        start = time.perf_counter()
        cert = certify_pareto(a_star_lq(z_pareto(lam, p), lam, p), contracts_pareto(lam, p), p, res)
        print(f"pareto lam={lam:.2f}: {'PASS' if cert.passed else 'FAIL'} "
              f"({time.perf_counter() - start:.1f} s)")
    a = nash_actions(z_nash(p), p)
    print(f"nash: {'PASS' if certify_nash(a, contracts_nash(p), p, res).passed else 'FAIL'}")
    cert = certify_pareto(a, contracts_nash(p), p, res)
    if cert.passed:
        print("nash effort undominated on the grid")
    else:
        print(f"nash effort Pareto dominated by {np.round(cert.witness, 6).tolist()}")


if __name__ == "__main__":
    main(*sys.argv[1:])
