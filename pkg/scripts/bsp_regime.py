"""Two-superstep BSP on unit map calls: map makespan against w/p and the occupancy oracle."""

import argparse

from mrsim.experiments import bsp_uniform_regime


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--p", type=int, nargs="+", default=[4, 16, 64])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--trials", type=int, default=100_000)
    args = ap.parse_args()
    print("p,worst_map_ratio,mean_max_calls,oracle,rel_error")
    for r in bsp_uniform_regime(args.n, args.p, args.seeds, args.trials):
        print(f"{r.p},{max(r.map_work_ratio):.4f},{r.mean_calls:.2f},{r.oracle:.2f},{r.occupancy_error:.4f}")


if __name__ == "__main__":
    main()
