"""Run every standard preset through the CLI and summarize the outcome.

    python scripts/run_presets.py --out-dir runs            # full scale
    python scripts/run_presets.py --out-dir runs --trials 50
"""
from __future__ import annotations

import argparse
import json
import pathlib

from dopocim.cli import main as cli_main
from dopocim.presets import PRESET_NAMES, get_preset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="runs")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--presets", nargs="+", default=list(PRESET_NAMES))
    args = ap.parse_args(argv)
    out = pathlib.Path(args.out_dir)
    for name in args.presets:
        command = "fliptrace" if "fliptrace" in get_preset(name) else "run"
        argv_cli = [command, "--preset", name, "--out-dir", str(out / name)]
        if command == "run":
            argv_cli += ["--parallel", str(args.parallel)]
            if args.trials:
                argv_cli += ["--trials", str(args.trials)]
        print(f"== {name}", flush=True)
        code = cli_main(argv_cli)
        if code != 0:
            print(f"{name}: exit code {code}")
    summary = {}
    for path in sorted(out.glob("*/*.report.json")):
        doc = json.loads(path.read_text())
        summary[path.stem.removesuffix(".report")] = {"success_rate": doc["success_rate"], "ci95": doc["ci95"]}
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")


if __name__ == "__main__":
    main()
