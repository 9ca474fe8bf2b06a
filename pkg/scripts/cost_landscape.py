"""Passage costs, global well costs, and the limiting verdict across tilts.

Sweeps the tilt ratio sigma1/sigma0, computes the band-to-band cost matrix
by the line integral and (optionally) by direct path minimization, derives
the per-well global costs, and records which well the vanishing-noise limit
selects.  The expensive direction is always leaving the quiet well: the
escape from K1 costs more exactly when sigma1 > 0.

Writes landscape.csv in the output directory, one row per ratio.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from degenwell.model import Params
from degenwell.quasipotential import classify_limit_measure, cost_matrix, global_costs

DEFAULT_RATIOS = (-0.9, -0.5, -0.1, 0.0, 0.1, 0.5, 0.9)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--ratio", type=float, nargs="+", default=list(DEFAULT_RATIOS),
        help="sigma1/sigma0 values to sweep",
    )
    parser.add_argument(
        "--check-descent", action="store_true",
        help="also minimize discretized paths and report the disagreement",
    )
    parser.add_argument("--nodes", type=int, default=400)
    parser.add_argument("--output", type=Path, default=Path("sweep_out"))
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    args.output.mkdir(parents=True, exist_ok=True)
    table = args.output / "landscape.csv"
    with open(table, "w") as stream:
        stream.write("ratio,V12,V32,W1,W2,W3,argmin,measure,descent_max_diff\n")
        for ratio in args.ratio:
            p = Params(sigma1=ratio)
            cm = cost_matrix(p)
            wc = global_costs(cm)
            measure = classify_limit_measure(p)
            disagreement = ""
            if args.check_descent:
                other = cost_matrix(p, method="path-opt", n=args.nodes)
                disagreement = f"{np.max(np.abs(other.entries - cm.entries)):.3g}"
            wells = "+".join(f"K{i}" for i in wc.argmin)
            stream.write(
                f"{ratio:.17g},{cm.cost(1, 2):.17g},{cm.cost(3, 2):.17g},"
                f"{wc.cost(1):.17g},{wc.cost(2):.17g},{wc.cost(3):.17g},"
                f"{wells},{measure.label},{disagreement}\n"
            )
            print(
                f"ratio={ratio:+.2f}  V12={cm.cost(1, 2):.4f} V32={cm.cost(3, 2):.4f}"
                f"  argmin={wells}  ->  {measure.label}"
                + (f"  (descent diff {disagreement})" if disagreement else "")
            )
    print(f"wrote {table}")


if __name__ == "__main__":
    main()
