"""Fitted work and communication constants of work stealing as p grows.

Runs both starting layouts so the effect of the initial placement is visible
side by side: every job on PE 1, and jobs spread uniformly at random.
"""

import argparse

from mrsim.experiments import spread, steal_scaling


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--p", type=int, nargs="+", default=[8, 32, 128])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--L", type=float, default=1.0)
    ap.add_argument("--g", type=float, default=1.0)
    args = ap.parse_args()
    print("layout,p,C_work,C_comm")
    for layout, concentrated in (("one-pe", True), ("spread", False)):
        res = steal_scaling(args.n, args.p, args.seeds, concentrated, args.L, args.g)
        for r in res:
            print(f"{layout},{r.p},{r.work_c:.3f},{r.comm_c:.3f}")
        ws, cs = spread(r.work_c for r in res), spread(r.comm_c for r in res)
        print(f"# {layout}: relative spread work {ws:.1%}, comm {cs:.1%}")


if __name__ == "__main__":
    main()
