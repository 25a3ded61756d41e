"""Write the value curves of the reference economy to CSV and print a short summary.

Usage: python scripts/reproduce_figure1.py [out.csv]
"""

import sys

from pareto_contracts.cli import figure1_csv
from pareto_contracts.config import parse_config
from pareto_contracts.lq_model import g_na_limit, weak_pareto_values

CONFIG = {"k": [[2, 1], [10, 5]], "r_p": 1.0}


def main(out="figure1.csv"):
    cfg = parse_config(CONFIG)
    text = figure1_csv(cfg)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    g0, g1 = weak_pareto_values(cfg.params)
    print(f"wrote {out}: {text.count(chr(10)) - 1} rows")
    print(f"weak Pareto endpoints g(0)={g0:g} g(1)={g1:g}; Nash limit {g_na_limit(cfg.params):g}")


if __name__ == "__main__":
    main(*sys.argv[1:])
