"""Prefix-shuffle volume bound on the named workloads, plus the expander witness."""

import argparse

from mrsim.core import compute_parameters
from mrsim.experiments import acceptance_traces, expander_witness
from mrsim.machine import MachineConfig
from mrsim.sched_bsp import distribute_randomly
from mrsim.shuffle import ShuffleConfig, run_shuffle, volume_bound_holds


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, nargs="+", default=[4, 16, 64])
    ap.add_argument("--seeds", type=int, default=2)
    args = ap.parse_args()
    print("workload,p,seed,max_deliver_words,bound_holds")
    for name, tr in acceptance_traces():
        m = compute_parameters(tr).m
        for p in args.p:
            for seed in range(args.seeds):
                pair_pe = distribute_randomly(tr, p, seed)[tr.pair_elem]
                res = run_shuffle(tr, pair_pe, MachineConfig(p, seed=seed), ShuffleConfig(seed=seed), m=m)
                led = res.report.ledger.phases["deliver"]
                print(f"{name},{p},{seed},{int(max(led.sent.max(), led.received.max()))},{volume_bound_holds(res, p)}")
    fr = expander_witness()
    print(f"# expander: moved share of words(B) min {min(fr):.3f} max {max(fr):.3f}")


if __name__ == "__main__":
    main()
