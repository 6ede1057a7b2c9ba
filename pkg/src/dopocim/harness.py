"""Monte Carlo experiments: trial fan-out, scoring against the exact oracle."""

from __future__ import annotations

import hashlib
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import __version__
from .ising import IsingInstance, SpectrumSummary, brute_force_spectrum, instance_from_dict, \
    instance_to_dict, ising_energy, spins_to_str
from .multimode import MultimodeParams, build_model, readout_spins, simulate_multimode
from .schedule import PumpSchedule
from .singlemode import SingleModeParams, readout, simulate_singlemode

MODELS = ("singlemode", "multimode")


def trial_rng(base_seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one trial, keyed by ``(base_seed, trial_index)``."""
    ss = np.random.SeedSequence(entropy=int(base_seed) & (2 ** 64 - 1), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.PCG64(ss))


class NegatedNoise:
    """Noise source yielding the exact negatives of a wrapped generator's normals."""

    def __init__(self, rng):
        self.rng = rng

    def standard_normal(self, size=None):
        return -self.rng.standard_normal(size)


class ZeroNoise:
    def standard_normal(self, size=None):
        return np.zeros(size)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if not 0 <= successes <= trials or trials < 1:
        raise ValueError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    z = float(norm.ppf(0.5 + confidence / 2))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo, hi = centre - half, centre + half
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return max(0.0, lo), min(1.0, hi)


@dataclass
class TrialResult:
    spins: np.ndarray
    energy: float
    rounds: int
    flags: list[str] = field(default_factory=list)
    success: bool | None = None
    trajectory: list[dict] | None = None

    def to_dict(self) -> dict:
        d = {
            "spins": spins_to_str(self.spins),
            "energy": _num(self.energy),
            "rounds": int(self.rounds),
            "flags": list(self.flags),
        }
        if self.success is not None:
            d["success"] = bool(self.success)
        if self.trajectory is not None:
            d["trajectory"] = self.trajectory
        return d


def success_curve_point(state, spectrum: SpectrumSummary, instance: IsingInstance) -> bool:
    """Whether the sign readout of a sampled state is a ground state.

    ``state`` holds real amplitudes, or complex mode coefficients whose
    fundamental is in the last axis' first entry.  Any zero amplitude makes
    the readout degenerate, which counts as failure.
    """
    state = np.asarray(state)
    amp = np.real(state[..., 0]) if np.iscomplexobj(state) else state
    if np.any(amp == 0.0):
        return False
    spins = np.where(amp < 0, -1, 1)
    return bool(abs(ising_energy(instance, spins) - spectrum.ground_energy) <= 1e-9)


@dataclass
class ExperimentSpec:
    instance: IsingInstance
    model: str
    params: SingleModeParams | MultimodeParams
    schedule: PumpSchedule
    trials: int = 1000
    base_seed: int = 0
    record_stride: int | None = None
    parallel: int = 1
    label: str = ""

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        want = SingleModeParams if self.model == "singlemode" else MultimodeParams
        if not isinstance(self.params, want):
            raise TypeError(f"{self.model} needs {want.__name__}")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "instance": instance_to_dict(self.instance),
            "model": self.model,
            "params": self.params.to_dict(),
            "schedule": self.schedule.to_dict(),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "record_stride": self.record_stride,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        model = doc["model"]
        pcls = SingleModeParams if model == "singlemode" else MultimodeParams
        return cls(
            instance=instance_from_dict(doc["instance"]),
            model=model,
            params=pcls.from_dict(doc.get("params", {})),
            schedule=PumpSchedule.from_dict(doc["schedule"]),
            trials=doc.get("trials", 1000),
            base_seed=doc.get("base_seed", 0),
            record_stride=doc.get("record_stride"),
            parallel=doc.get("parallel", 1),
            label=doc.get("label", ""),
        )


@dataclass
class ExperimentReport:
    success_rate: float
    successes: int
    trials: int
    ci95: tuple[float, float]
    success_curve: list[tuple[float, float]]
    final_energy_histogram: dict[float, int]
    per_trial: list[TrialResult]
    failed_numeric: int
    ground_energy: float
    provenance: dict
    timestamp: str = ""

    def to_dict(self, include_timestamp: bool = True) -> dict:
        d = {
            "success_rate": self.success_rate,
            "successes": self.successes,
            "trials": self.trials,
            "ci95": list(self.ci95),
            "ground_energy": _num(self.ground_energy),
            "failed_numeric": self.failed_numeric,
            "success_curve": [[_num(t), f] for t, f in self.success_curve],
            "final_energy_histogram": [[_num(e), c] for e, c in sorted(self.final_energy_histogram.items())],
            "per_trial": [t.to_dict() for t in self.per_trial],
            "provenance": self.provenance,
        }
        if include_timestamp:
            d["timestamp"] = self.timestamp
        return d

    def digest(self) -> str:
        """Hash of the report contents, excluding the timestamp."""
        blob = json.dumps(self.to_dict(include_timestamp=False), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def curve_csv(self) -> str:
        lines = ["round,success_fraction"]
        lines += [f"{_num(t)},{f!r}" for t, f in self.success_curve]
        return "\n".join(lines) + "\n"

    def histogram_csv(self) -> str:
        lines = ["energy,count"]
        lines += [f"{_num(e)},{c}" for e, c in sorted(self.final_energy_histogram.items())]
        return "\n".join(lines) + "\n"


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def _run_block(spec: ExperimentSpec, lo: int, hi: int):
    rngs = [trial_rng(spec.base_seed, i) for i in range(lo, hi)]
    if spec.model == "singlemode":
        batch = simulate_singlemode(spec.params, spec.instance, spec.schedule, rngs, spec.record_stride)
        spins, ties = readout(batch.x)
        times = batch.record_rounds.astype(float)
        return spins, ties.any(axis=1), batch.failed, times, batch.record_energy, batch.record_degenerate
    model = build_model(spec.params)
    S, failed, rec = simulate_multimode(model, spec.instance, spec.schedule, rngs, spec.record_stride,
                                        record_modes=1)
    spins, ties = readout_spins(S)
    if rec is None:
        times = np.zeros(0)
        energies = np.zeros((hi - lo, 0))
        degenerate = np.zeros((hi - lo, 0), dtype=bool)
    else:
        times = spec.params.dt * spec.record_stride * np.arange(1, rec.shape[1] + 1)
        rs, rties = readout_spins(rec)
        energies = ising_energy(spec.instance, rs)
        degenerate = rties.any(axis=-1)
    return spins, ties.any(axis=1), failed, times, energies, degenerate


def _blocks(trials: int, parallel: int) -> list[tuple[int, int]]:
    k = max(1, min(parallel, trials))
    edges = np.linspace(0, trials, k + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_experiment(spec: ExperimentSpec, spectrum: SpectrumSummary | None = None) -> ExperimentReport:
    """Run every trial and score it against the brute-force ground energy.

    Trials are split into contiguous index blocks; results are merged by
    trial index, so the report does not depend on ``parallel``.
    """
    if spectrum is None:
        spectrum = brute_force_spectrum(spec.instance)
    eg = spectrum.ground_energy
    blocks = _blocks(spec.trials, spec.parallel)
    if len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(pool.map(_run_block, [spec] * len(blocks), *zip(*blocks)))
    else:
        parts = [_run_block(spec, *blocks[0])]
    spins = np.concatenate([p[0] for p in parts])
    ties = np.concatenate([p[1] for p in parts])
    failed = np.concatenate([p[2] for p in parts])
    times = parts[0][3]
    rec_e = np.concatenate([p[4] for p in parts])
    rec_deg = np.concatenate([p[5] for p in parts])

    energies = ising_energy(spec.instance, spins)
    energies = np.atleast_1d(energies)
    hit = (np.abs(energies - eg) <= 1e-9) & ~ties & ~failed
    length = spec.params.n_rounds if spec.model == "singlemode" else spec.params.n_steps
    per_trial = []
    for i in range(spec.trials):
        flags = []
        if failed[i]:
            flags.append("failed-numeric")
        if ties[i]:
            flags.append("degenerate-readout")
        per_trial.append(TrialResult(spins=spins[i], energy=float(energies[i]), rounds=length, flags=flags,
                                     success=bool(hit[i])))
    curve = []
    if times.size:
        ok = (np.abs(rec_e - eg) <= 1e-9) & ~rec_deg
        frac = ok.mean(axis=0)
        curve = [(float(t), float(f)) for t, f in zip(times, frac)]
    hist = Counter(float(e) for e in energies)
    successes = int(hit.sum())
    return ExperimentReport(
        success_rate=successes / spec.trials,
        successes=successes,
        trials=spec.trials,
        ci95=wilson_interval(successes, spec.trials),
        success_curve=curve,
        final_energy_histogram=dict(sorted(hist.items())),
        per_trial=per_trial,
        failed_numeric=int(failed.sum()),
        ground_energy=eg,
        provenance={"spec": spec.to_dict(), "base_seed": spec.base_seed, "version": __version__},
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    )
