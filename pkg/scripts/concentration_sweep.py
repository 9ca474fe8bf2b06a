"""Occupation fractions of the well bands as the noise scale shrinks.

For each (sigma1, epsilon) pair this runs a balanced-start ensemble and
records how the time spent in the left band K1, the saddle band K2, the
right band K3 and the far region splits up.  As epsilon decreases the
occupation should pile onto the band around the favored well: both outer
bands for sigma1 = 0, K1 for sigma1 > 0, K3 for sigma1 < 0.

Writes one row per pair to concentration.csv in the output directory.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from degenwell.cli import invariant_experiment
from degenwell.model import Params


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sigma1", type=float, nargs="+", default=[0.0, 0.5, -0.5],
        help="noise tilts to sweep",
    )
    parser.add_argument(
        "--epsilon", type=float, nargs="+", default=[0.35, 0.3, 0.25],
        help="noise scales to sweep (smaller = longer waits between hops)",
    )
    parser.add_argument("--t-final", type=float, default=5000.0)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--n-paths", type=int, default=16)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--delta", type=float, default=0.1, help="band half-width")
    parser.add_argument("--output", type=Path, default=Path("sweep_out"))
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    args.output.mkdir(parents=True, exist_ok=True)
    table = args.output / "concentration.csv"
    with open(table, "w") as stream:
        stream.write("sigma1,epsilon,K1,K2,K3,outside,n_paths,t_final,seed\n")
        for sigma1 in args.sigma1:
            for epsilon in args.epsilon:
                p = Params(sigma1=sigma1, epsilon=epsilon)
                hist = invariant_experiment(
                    p,
                    dt=args.dt,
                    t_final=args.t_final,
                    seed=args.seed,
                    n_paths=args.n_paths,
                    delta=args.delta,
                )
                k1 = hist.fraction("K1")
                k2 = hist.fraction("K2")
                k3 = hist.fraction("K3")
                out = hist.fraction(f"outside_ball_{3:g}")
                stream.write(
                    f"{sigma1:.17g},{epsilon:.17g},{k1:.17g},{k2:.17g},"
                    f"{k3:.17g},{out:.17g},{args.n_paths},{args.t_final:.17g},"
                    f"{args.seed}\n"
                )
                print(
                    f"sigma1={sigma1:+.2f} eps={epsilon:.2f}  "
                    f"K1={k1:.3f} K2={k2:.3f} K3={k3:.3f} outside={out:.2g}"
                )
    print(f"wrote {table}")


if __name__ == "__main__":
    main()
