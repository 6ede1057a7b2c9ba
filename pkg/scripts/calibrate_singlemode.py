"""Sweep the single-mode round-trip map over (gain form, T_s, x_sat).

For each grid point this records the abrupt and gradual success curves of
the three 16-pulse benchmarks and writes one JSON line per point.  R_inj is
held at 0.075.  Only the ratio x_sat / sqrt(vacuum_variance) matters for
the map, so the vacuum variance is held at 1/4.

    python scripts/calibrate_singlemode.py --trials 400 --out scripts/results/singlemode_sweep.jsonl
"""
from __future__ import annotations

import argparse
import itertools
import json
import time

import numpy as np

from dopocim.harness import trial_rng
from dopocim.ising import brute_force_spectrum, make_named_instance
from dopocim.schedule import PumpSchedule
from dopocim.singlemode import SingleModeParams, simulate_singlemode

ABRUPT = PumpSchedule.abrupt(2.7)
GRADUAL = PumpSchedule.linear(1.0, 2.7, 10000)
INSTANCES = ("ferro-ring-16", "antiferro-ring-16", "cubic-16")


def success_curve(params: dict, name: str, schedule: PumpSchedule, rounds: int, trials: int, seed: int,
                  stride: int = 50) -> dict[int, float]:
    inst = make_named_instance(name)
    eg = brute_force_spectrum(inst).ground_energy
    p = SingleModeParams(rounds=rounds, **params)
    batch = simulate_singlemode(p, inst, schedule, [trial_rng(seed, i) for i in range(trials)], stride)
    ok = (batch.record_energy == eg) & ~batch.record_degenerate
    return dict(zip(batch.record_rounds.tolist(), ok.mean(axis=0).tolist()))


def first_crossing(curve: dict[int, float], level: float = 0.99):
    return next((r for r, v in sorted(curve.items()) if v >= level), None)


def evaluate(params: dict, trials: int, seed: int, gradual_rounds: int) -> dict:
    out = {}
    for name in INSTANCES:
        ab = success_curve(params, name, ABRUPT, 10000, trials, seed)
        gr = success_curve(params, name, GRADUAL, gradual_rounds, trials, seed)
        out[name] = {"abrupt_300": ab[300], "abrupt_final": ab[10000],
                     "gradual_crossing": first_crossing(gr), "gradual_final": gr[gradual_rounds]}
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=400)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--gradual-rounds", type=int, default=4000)
    ap.add_argument("--forms", nargs="+", default=["sqrt-pump", "exp-pump"])
    ap.add_argument("--T-s", nargs="+", type=float, default=[0.1, 0.2])
    ap.add_argument("--x-sat", nargs="+", type=float, default=[0.8, 0.9, 1.0, 1.25, 1.5, 2.2])
    ap.add_argument("--out", default="scripts/results/singlemode_sweep.jsonl")
    args = ap.parse_args(argv)
    with open(args.out, "w") as fh:
        for form, T, xs in itertools.product(args.forms, args.T_s, args.x_sat):
            params = {"gain_form": form, "T_s": T, "R_inj": 0.075, "x_sat": xs}
            t0 = time.perf_counter()
            res = evaluate(params, args.trials, args.seed, args.gradual_rounds)
            row = {"params": params, "trials": args.trials, "seed": args.seed, "results": res,
                   "seconds": round(time.perf_counter() - t0, 1)}
            fh.write(json.dumps(row) + "\n")
            fh.flush()
            print(json.dumps(row), flush=True)


if __name__ == "__main__":
    np.seterr(all="ignore")
    main()
