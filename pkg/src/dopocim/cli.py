"""Command-line driver: exact solves, Monte Carlo runs, flip traces."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .harness import ExperimentSpec, run_experiment, trial_rng
from .ising import NAMED_INSTANCES, InstanceError, brute_force_spectrum, instance_from_dict, load_instance, \
    spins_to_str
from .multimode import MultimodeParams, MultimodeTrajectory, build_model, flip_events, readout_spins, \
    simulate_multimode
from .presets import PRESET_NAMES, get_preset
from .schedule import PumpSchedule
from .schemas import RUN_CONFIG_SCHEMA, SCHEMAS, validation_errors
from .singlemode import SingleModeParams

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


# --- config handling ------------------------------------------------------

def load_config(path: str | None, preset: str | None) -> dict:
    if preset is not None:
        try:
            return get_preset(preset)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if isinstance(doc, dict) and "provenance" in doc and "spec" in doc.get("provenance", {}):
        # a report: re-run the experiment it records
        doc = dict(doc["provenance"]["spec"])
    return doc


def apply_overrides(doc: dict, args) -> dict:
    doc = dict(doc)
    if getattr(args, "instance", None):
        doc.pop("instances", None)
        doc["instance"] = args.instance
    for flag, key in (("trials", "trials"), ("seed", "base_seed"), ("parallel", "parallel"),
                      ("stride", "record_stride")):
        v = getattr(args, flag, None)
        if v is not None:
            doc[key] = v
    return doc


def _resolve_instance(ref, where: str):
    try:
        if isinstance(ref, str):
            return load_instance(ref)
        return instance_from_dict(ref, where)
    except KeyError as exc:
        raise ConfigError(f"{where}: {exc.args[0]}") from None
    except (OSError, InstanceError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_specs(doc: dict) -> list[ExperimentSpec]:
    """Validate a run config and expand it into one spec per instance."""
    errors = validation_errors(doc, RUN_CONFIG_SCHEMA)
    if errors:
        raise ConfigError("schema violation at " + "; ".join(errors))
    if "instances" in doc:
        refs = [(r, f"/instances/{k}") for k, r in enumerate(doc["instances"])]
    else:
        refs = [(doc["instance"], "/instance")]
    specs = []
    for ref, where in refs:
        inst = _resolve_instance(ref, where)
        params = dict(doc.get("params", {}))
        params.setdefault("n_pulses", inst.n)
        try:
            if doc["model"] == "singlemode":
                p = SingleModeParams.from_dict(params)
                p.check_instance(inst)
                length = p.n_rounds
            else:
                p = MultimodeParams.from_dict(params)
                if p.n_pulses != inst.n:
                    raise ValueError(f"instance has n={inst.n} but n_pulses={p.n_pulses}")
                length = p.n_steps
            schedule = PumpSchedule.from_dict(doc["schedule"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
        stride = doc.get("record_stride")
        if stride is not None and stride > length:
            raise ConfigError(f"/record_stride: {stride} exceeds the run length of {length}")
        specs.append(ExperimentSpec(
            instance=inst, model=doc["model"], params=p, schedule=schedule,
            trials=doc.get("trials", 1000), base_seed=doc.get("base_seed", 0), record_stride=stride,
            parallel=doc.get("parallel", 1), label=doc.get("label", ""),
        ))
    return specs


def _stem(spec: ExperimentSpec) -> str:
    label = spec.label or "run"
    return f"{label}-{spec.instance.name}"


def _write(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


# --- commands -------------------------------------------------------------

def cmd_list(args) -> int:
    print("instances:")
    for name in NAMED_INSTANCES:
        print(f"  {name}")
    print("presets:")
    for name in PRESET_NAMES:
        print(f"  {name}")
    return EXIT_OK


def cmd_solve(args) -> int:
    ref = args.ref or args.instance
    if ref is None:
        raise ConfigError("solve needs an instance name or path")
    inst = _resolve_instance(ref, "instance")
    spec = brute_force_spectrum(inst)
    doc = spec.to_dict()
    doc["instance"] = inst.name
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        counts = spec.local_minima_counts()
        print(f"instance: {inst.name} (n={inst.n}, edges={len(inst.edges)})")
        print(f"ground energy: {doc['ground_energy']}")
        print(f"degeneracy: {spec.degeneracy}")
        print(f"levels: {', '.join(str(e) for e, _ in doc['energy_histogram'])}")
        for key in sorted(counts):
            print(f"local minima ({key}): {counts[key]}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        _write(os.path.join(args.out_dir, f"{inst.name}.spectrum.json"), json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_run(args) -> int:
    doc = apply_overrides(load_config(args.config, args.preset), args)
    max_failed = doc.get("max_failed_fraction", 0.01)
    specs = build_specs(doc)
    out_dir = args.out_dir or doc.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    code = EXIT_OK
    for spec in specs:
        rep = run_experiment(spec)
        stem = os.path.join(out_dir, _stem(spec))
        _write(stem + ".report.json", json.dumps(rep.to_dict(), indent=1) + "\n")
        _write(stem + ".curve.csv", rep.curve_csv())
        _write(stem + ".histogram.csv", rep.histogram_csv())
        lo, hi = rep.ci95
        print(f"{spec.instance.name}: success {rep.successes}/{rep.trials} = {rep.success_rate:.3f} "
              f"(95% CI {lo:.4f}-{hi:.4f}), failed-numeric {rep.failed_numeric}")
        if rep.failed_numeric > max_failed * rep.trials:
            print(f"error: {spec.instance.name}: numeric failure fraction "
                  f"{rep.failed_numeric / rep.trials:.3f} exceeds {max_failed}", file=sys.stderr)
            code = EXIT_NUMERIC
    return code


def trajectory_csv(traj: MultimodeTrajectory) -> str:
    """Long-format table ``t,pulse,k,re,im,intensity``, one row per coefficient sample."""
    S = np.asarray(traj.S)
    T, n, K = S.shape
    t = np.repeat(np.asarray(traj.t, dtype=float), n * K)
    pulse = np.tile(np.repeat(np.arange(n), K), T)
    k = np.tile(np.arange(K), T * n)
    flat = S.reshape(-1)
    rows = ["t,pulse,k,re,im,intensity"]
    rows += [f"{a!r},{b},{c},{d!r},{e!r},{f!r}" for a, b, c, d, e, f in
             zip(t.tolist(), pulse.tolist(), k.tolist(), flat.real.tolist(), flat.imag.tolist(),
                 (np.abs(flat) ** 2).tolist())]
    return "\n".join(rows) + "\n"


def run_fliptrace(spec: ExperimentSpec, opts: dict, seed: int) -> tuple[MultimodeTrajectory, dict]:
    """One recorded trial plus flip analysis of the requested pulse(s)."""
    model = build_model(spec.params)
    S, failed, rec = simulate_multimode(model, spec.instance, spec.schedule, [trial_rng(seed, 0)],
                                        spec.record_stride)
    t = spec.params.dt * spec.record_stride * np.arange(1, rec.shape[1] + 1)
    traj = MultimodeTrajectory(t=t, S=rec[0])
    pulses = range(spec.instance.n) if opts.get("pulse") is None else [opts["pulse"]]
    floor = opts.get("intensity_floor", 0.0)
    events = []
    for a in pulses:
        events += flip_events(traj, a, t_skip=opts.get("t_skip", 0.0), window=opts.get("window", 2.0),
                              hysteresis=opts.get("hysteresis", 0.0))
    records = []
    for ev in events:
        d = ev.to_dict()
        d["qualifies"] = bool(ev.min_total_intensity > floor and ev.peak_higher_intensity > ev.pre_higher_mean)
        records.append(d)
    spins, _ = readout_spins(S[0])
    report = {
        "seed": int(seed),
        "intensity_floor": floor,
        "pulse_events": records,
        "qualifying_events": sum(r["qualifies"] for r in records),
        "final_spins": spins_to_str(spins),
        "failed_numeric": bool(failed[0]),
        "provenance": {"spec": spec.to_dict(), "fliptrace": opts, "version": __version__},
    }
    return traj, report


def cmd_fliptrace(args) -> int:
    doc = apply_overrides(load_config(args.config, args.preset), args)
    opts = dict(doc.pop("fliptrace", {}))
    if doc.get("model") != "multimode":
        raise ConfigError("/model: fliptrace needs the multimode model")
    if doc.get("record_stride") is None:
        raise ConfigError("/record_stride: fliptrace needs a recording stride")
    specs = build_specs(doc)
    if len(specs) != 1:
        raise ConfigError("/instances: fliptrace runs exactly one instance")
    spec = specs[0]
    seeds = [args.seed] if args.seed is not None else opts.get("seeds", [spec.base_seed])
    out_dir = args.out_dir or doc.get("out_dir") or "."
    # compute everything before touching the filesystem
    results = [(s, *run_fliptrace(spec, opts, s)) for s in seeds]
    os.makedirs(out_dir, exist_ok=True)
    for seed, traj, report in results:
        stem = os.path.join(out_dir, f"{_stem(spec)}-seed{seed}")
        _write(stem + ".trajectory.csv", trajectory_csv(traj))
        _write(stem + ".flips.json", json.dumps(report, indent=1) + "\n")
        print(f"seed {seed}: {len(report['pulse_events'])} flip(s), "
              f"{report['qualifying_events']} above intensity floor {report['intensity_floor']}")
    return EXIT_NUMERIC if any(r["failed_numeric"] for _, _, r in results) else EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(SCHEMAS[args.name], indent=2))
    return EXIT_OK


# --- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dopocim", description="DOPO network Ising machine simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="named instances and presets")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("solve", help="exact spectrum by enumeration")
    p.add_argument("ref", nargs="?", help="instance name or JSON path")
    p.add_argument("--instance")
    p.add_argument("--json", action="store_true", help="print the spectrum JSON instead of a summary")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_solve)

    for name, func, helptext in (("run", cmd_run, "Monte Carlo experiment"),
                                 ("fliptrace", cmd_fliptrace, "record one multimode trial and detect flips")):
        p = sub.add_parser(name, help=helptext)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config")
        src.add_argument("--preset", choices=PRESET_NAMES)
        p.add_argument("--instance", help="override the config's instance(s)")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--parallel", type=int)
        p.add_argument("--stride", type=int, help="override the recording stride")
        p.add_argument("--out-dir")
        p.set_defaults(func=func)

    p = sub.add_parser("schema", help="print a JSON schema")
    p.add_argument("name", choices=sorted(SCHEMAS))
    p.set_defaults(func=cmd_schema)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
