"""Round-trip map for a network of single-mode DOPO pulses.

Only the in-phase amplitude ``x`` of each pulse is tracked.  Every round
trip applies, in order: output coupling with vacuum noise, saturable
parametric gain, and simultaneous beamsplitter mutual injection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ising import IsingInstance, ising_energy
from .schedule import PumpSchedule, evaluate_schedule

GAIN_FORMS = ("sqrt-pump", "exp-pump")


@dataclass(frozen=True)
class SingleModeParams:
    """Round-trip model parameters.

    ``gain_form`` selects the small-signal amplitude gain at pump rate ``p``:
    ``sqrt-pump`` is ``g_th * sqrt(p)``, ``exp-pump`` is ``g_th ** sqrt(p)``.
    Both equal ``g_th`` at threshold.
    """

    n_pulses: int = 16
    T_s: float = 0.1
    R_inj: float = 0.075
    x_sat: float = 1.0
    vacuum_variance: float = 0.25
    rounds: int = 10000
    readout_round: int | None = None
    normalize_by_degree: bool = False
    gain_form: str = "sqrt-pump"

    def __post_init__(self):
        if not 0.0 < self.T_s < 1.0:
            raise ValueError(f"T_s must lie in (0, 1), got {self.T_s}")
        if not 0.0 <= self.R_inj < 1.0:
            raise ValueError(f"R_inj must lie in [0, 1), got {self.R_inj}")
        if self.x_sat <= 0 or self.vacuum_variance < 0:
            raise ValueError("x_sat must be positive and vacuum_variance non-negative")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.readout_round is not None and not 1 <= self.readout_round <= self.rounds:
            raise ValueError("readout_round must lie in [1, rounds]")
        if self.gain_form not in GAIN_FORMS:
            raise ValueError(f"gain_form must be one of {GAIN_FORMS}")

    @property
    def n_rounds(self) -> int:
        return self.rounds if self.readout_round is None else self.readout_round

    def effective_reflectance(self, instance: IsingInstance) -> float:
        d = instance.max_degree
        if self.normalize_by_degree and d > 0:
            return self.R_inj / d
        return self.R_inj

    def check_instance(self, instance: IsingInstance) -> None:
        if instance.n != self.n_pulses:
            raise ValueError(f"instance has n={instance.n} but n_pulses={self.n_pulses}")
        loss = self.T_s + self.effective_reflectance(instance) * instance.max_degree
        if not loss < 1.0:
            raise ValueError(f"total passive loss per round {loss:.3f} must stay below 1")

    def threshold_gain(self, instance: IsingInstance) -> float:
        """Amplitude gain cancelling output-coupler and injection tap-off losses."""
        r_tot = self.effective_reflectance(instance) * instance.max_degree
        return 1.0 / math.sqrt((1.0 - self.T_s) * (1.0 - r_tot))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, doc: dict) -> "SingleModeParams":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown single-mode parameter(s): {sorted(unknown)}")
        return cls(**doc)


def out_couple(x: np.ndarray, T: float, noise: np.ndarray, variance: float = 0.25) -> np.ndarray:
    """Partial transmission with vacuum entering the open port.

    ``noise`` holds standard normal draws, one per pulse, in pulse order.
    """
    if not 0.0 < T < 1.0:
        raise ValueError(f"coupler transmittance must lie in (0, 1), got {T}")
    return math.sqrt(1.0 - T) * x + math.sqrt(T * variance) * noise


def small_signal_gain(g_th: float, p: float, form: str = "sqrt-pump") -> float:
    if p < 0:
        raise ValueError("pump rate must be non-negative")
    if form == "sqrt-pump":
        return g_th * math.sqrt(p)
    if form == "exp-pump":
        return g_th ** math.sqrt(p)
    raise ValueError(f"unknown gain form {form!r}")


def parametric_gain_step(x: np.ndarray, p: float, g_th: float, x_sat: float = 1.0,
                         form: str = "sqrt-pump") -> np.ndarray:
    """Noiseless saturable gain ``G(p) x / (1 + x^2 / x_sat^2)``; odd in ``x``."""
    g = small_signal_gain(g_th, p, form)
    u = x / x_sat
    return g * x / (1.0 + u * u)


class Injector:
    """Beamsplitter mutual injection from a simultaneous snapshot.

    ``x_i <- sqrt(1 - d_i R) x_i + sqrt(R) sum_j sign(J_ij) x_j``.
    """

    def __init__(self, instance: IsingInstance, R_inj: float, normalize_by_degree: bool = False):
        d_max = instance.max_degree
        R = R_inj / d_max if normalize_by_degree and d_max > 0 else R_inj
        deg = instance.degrees
        if np.any(deg * R >= 1.0):
            raise ValueError("injection reflectance times degree must stay below 1")
        self.n = instance.n
        self.keep = np.sqrt(1.0 - deg * R)
        self.amp = math.sqrt(R)
        self.idx, self.sign = instance.neighbor_table()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.n:
            raise ValueError(f"state has {x.shape[-1]} pulses, instance has {self.n}")
        acc = np.zeros_like(x)
        for slot in range(self.idx.shape[1]):
            acc = acc + self.sign[:, slot] * x[..., self.idx[:, slot]]
        return self.keep * x + self.amp * acc


def injection_couple(x: np.ndarray, instance: IsingInstance, R_inj: float,
                     normalize_by_degree: bool = False) -> np.ndarray:
    return Injector(instance, R_inj, normalize_by_degree)(x)


def divergence_bound(params: SingleModeParams, instance: IsingInstance, p_max: float) -> float:
    """Ten times the largest steady-state amplitude the map can sustain."""
    inj = Injector(instance, params.R_inj, params.normalize_by_degree)
    lam = float(np.max(inj.keep)) + inj.amp * instance.max_degree
    g = small_signal_gain(params.threshold_gain(instance), p_max, params.gain_form)
    net = g * math.sqrt(1.0 - params.T_s) * lam
    return 10.0 * params.x_sat * math.sqrt(max(net - 1.0, 1.0))


@dataclass
class SingleModeBatch:
    x: np.ndarray
    failed: np.ndarray
    record_rounds: np.ndarray
    record_energy: np.ndarray
    record_degenerate: np.ndarray
    record_states: np.ndarray | None


def simulate_singlemode(params: SingleModeParams, instance: IsingInstance, schedule: PumpSchedule,
                        rngs, record_stride: int | None = None, keep_states: bool = False,
                        chunk_rounds: int = 500) -> SingleModeBatch:
    """Run independent trials side by side, one noise source per trial.

    Each trial draws ``n_pulses`` standard normals per round, in pulse
    order, from its own entry of ``rngs``.  Rounds are counted from 1; a
    record is taken after every ``record_stride``-th round, holding the
    sign-readout energy (and optionally the amplitudes).
    """
    params.check_instance(instance)
    B, n = len(rngs), params.n_pulses
    rounds = params.n_rounds
    if record_stride is not None and not 1 <= record_stride <= rounds:
        raise ValueError(f"record stride {record_stride} must be in [1, {rounds}]")
    g_th = params.threshold_gain(instance)
    inject = Injector(instance, params.R_inj, params.normalize_by_degree)
    p_max = max(schedule.p_start, schedule.p_end)
    bound = divergence_bound(params, instance, p_max)
    keep = math.sqrt(1.0 - params.T_s)
    kick = math.sqrt(params.T_s * params.vacuum_variance)

    x = np.zeros((B, n))
    failed = np.zeros(B, dtype=bool)
    rec_rounds, rec_e, rec_deg, rec_x = [], [], [], []
    noise = np.empty((B, chunk_rounds, n))
    for start in range(0, rounds, chunk_rounds):
        cr = min(chunk_rounds, rounds - start)
        for b, g in enumerate(rngs):
            noise[b, :cr] = g.standard_normal((cr, n))
        for k in range(cr):
            r = start + k
            p = evaluate_schedule(schedule, r)
            new = keep * x + kick * noise[:, k]
            new = parametric_gain_step(new, p, g_th, params.x_sat, params.gain_form)
            new = inject(new)
            bad = ~np.all(np.abs(new) < bound, axis=1)
            failed |= bad
            x = np.where(failed[:, None], x, new)
            if record_stride is not None and (r + 1) % record_stride == 0:
                spins = np.where(x < 0, -1, 1)
                rec_rounds.append(r + 1)
                rec_e.append(ising_energy(instance, spins))
                rec_deg.append(np.any(x == 0.0, axis=1))
                if keep_states:
                    rec_x.append(x.copy())
    return SingleModeBatch(
        x=x,
        failed=failed,
        record_rounds=np.array(rec_rounds, dtype=int),
        record_energy=np.array(rec_e).T.reshape(B, len(rec_rounds)),
        record_degenerate=np.array(rec_deg).T.reshape(B, len(rec_rounds)),
        record_states=np.stack(rec_x, axis=1) if keep_states and rec_x else None,
    )


def readout(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``sign(x)`` with zero read as +1, and the mask of zero amplitudes."""
    x = np.asarray(x)
    return np.where(x < 0, -1, 1).astype(np.int8), x == 0.0
