"""How the set of Planner weights that beat the Nash regime depends on risk aversion.

Prints one CSV line per risk aversion: r_p, lower edge, upper edge, width, Nash rate.
"""

import numpy as np

from pareto_contracts.lq_model import LqParams, g_na_at_optimum, lambda_improvement_set


def main():
    p = LqParams(k=[[2, 1], [10, 5]])
    print("r_p,lower,upper,width,g_na")
    for r in np.logspace(-4, 3, 15):
        (lo, hi), = lambda_improvement_set(p, r_p=r)
        print(f"{r:.6g},{lo:.10f},{hi:.10f},{hi - lo:.10f},{g_na_at_optimum(p, r):.10f}")


if __name__ == "__main__":
    main()
