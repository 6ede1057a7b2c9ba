"""Sweep the multimode model over (xi, pump width, K_nl) at p = 1.1.

Each grid point runs the four benchmarks and records the final success
rate; one JSON line per point and instance.

    python scripts/calibrate_multimode.py --trials 200 --out scripts/results/multimode_sweep.jsonl
"""
from __future__ import annotations

import argparse
import itertools
import json
import time

from dopocim.harness import ExperimentSpec, run_experiment
from dopocim.ising import make_named_instance
from dopocim.multimode import MultimodeParams
from dopocim.presets import ALL_BENCHMARKS, MULTIMODE_CALIBRATED
from dopocim.schedule import PumpSchedule


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--xi", nargs="+", type=float, default=[0.1, 0.3, 0.5, 1.0])
    ap.add_argument("--pump-width", nargs="+", type=float, default=[0.2, 0.3])
    ap.add_argument("--K-nl", nargs="+", type=float, default=[0.02, 0.06])
    ap.add_argument("--K-modes", nargs="+", type=int, default=[5])
    ap.add_argument("--instances", nargs="+", default=ALL_BENCHMARKS)
    ap.add_argument("--out", default="scripts/results/multimode_sweep.jsonl")
    args = ap.parse_args(argv)
    with open(args.out, "w") as fh:
        for K, xi, w, knl in itertools.product(args.K_modes, args.xi, args.pump_width, args.K_nl):
            for name in args.instances:
                inst = make_named_instance(name)
                params = MultimodeParams(**{**MULTIMODE_CALIBRATED, "n_pulses": inst.n, "K_modes": K,
                                            "xi": xi, "pump_width": w, "K_nl": knl})
                spec = ExperimentSpec(instance=inst, model="multimode", params=params,
                                      schedule=PumpSchedule.abrupt(1.1), trials=args.trials, base_seed=args.seed)
                t0 = time.perf_counter()
                rep = run_experiment(spec)
                row = {"instance": name, "K_modes": K, "xi": xi, "pump_width": w, "K_nl": knl,
                       "trials": args.trials, "seed": args.seed, "success_rate": rep.success_rate,
                       "failed_numeric": rep.failed_numeric, "seconds": round(time.perf_counter() - t0, 1)}
                fh.write(json.dumps(row) + "\n")
                fh.flush()
                print(json.dumps(row), flush=True)


if __name__ == "__main__":
    main()
