"""Multimode DOPO network: Hermite-mode coefficients per pulse.

Each pulse ``a`` carries complex coefficients ``S[a, k]`` for the Hermite
modes ``k = 0..K-1``.  The deterministic part of the motion is

    dS_i/dt = -(gamma + i Delta) S_i - i DeltaOmega sum_j D_ij S_j
              + K_nl p sum_j G_ij conj(S_j)
              - K_nl**2/4 sum_jkl L_ijkl conj(S_j) S_k S_l
              + gamma xi sum_b Jn_ab S^(b)_i

with ``Jn = J/|J|`` the normalized coupling sign.  Vacuum noise enters once
per step after the RK4 update.  Time is measured in units of ``1/gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .ising import IsingInstance, ising_energy
from .schedule import PumpSchedule, evaluate_schedule


# --- basis and tensors ----------------------------------------------------

@dataclass(frozen=True)
class HermiteBasis:
    K_modes: int
    N_s: float
    M: int
    m: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)

    def gram(self) -> np.ndarray:
        return self.psi @ self.psi.T


def build_hermite_basis(K_modes: int, N_s: float, M: int) -> HermiteBasis:
    """Sampled Hermite functions ``psi[k, m]`` on ``m = -M..M``.

    Uses the normalized three-term recurrence, so no factorials or raw
    Hermite polynomials are formed.
    """
    if K_modes < 1 or N_s <= 0 or M < 1:
        raise ValueError(f"need K_modes >= 1, N_s > 0, M >= 1; got {K_modes}, {N_s}, {M}")
    m = np.arange(-M, M + 1)
    x = m / N_s
    phi = np.zeros((K_modes, m.size))
    phi[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if K_modes > 1:
        phi[1] = math.sqrt(2.0) * x * phi[0]
    for k in range(1, K_modes - 1):
        phi[k + 1] = math.sqrt(2.0 / (k + 1)) * x * phi[k] - math.sqrt(k / (k + 1)) * phi[k - 1]
    return HermiteBasis(K_modes, float(N_s), int(M), m, phi / math.sqrt(N_s))


@dataclass(frozen=True)
class PhaseMatch:
    """Phase-matching factor ``f(m, q)`` between signal modes ``m`` and ``q``.

    ``constant`` gives ``f = 1``; ``sinc`` gives ``sinc((m - q) / width)``
    with numpy's normalized sinc.  Both are symmetric in ``(m, q)``.
    """

    kind: str = "constant"
    width: float = math.inf

    def __post_init__(self):
        if self.kind not in ("constant", "sinc"):
            raise ValueError(f"unknown phase-match kind {self.kind!r}")
        if self.kind == "sinc" and not self.width > 0:
            raise ValueError("sinc phase matching needs a positive width")

    def __call__(self, m, q):
        m, q = np.broadcast_arrays(np.asarray(m, float), np.asarray(q, float))
        if self.kind == "constant":
            return np.ones(m.shape)
        return np.sinc((m - q) / self.width)


@dataclass(frozen=True)
class CouplingTensors:
    D: np.ndarray
    G: np.ndarray
    L: np.ndarray
    q: np.ndarray = field(repr=False)


def pair_overlaps(basis: HermiteBasis, phase_match: PhaseMatch) -> tuple[np.ndarray, np.ndarray]:
    """``A[q, i, j] = sum_m f(m, q - m) psi[i, m] psi[j, q - m]`` for ``q = -2M..2M``.

    Terms with ``q - m`` outside ``[-M, M]`` are dropped.
    """
    M, K = basis.M, basis.K_modes
    q = np.arange(-2 * M, 2 * M + 1)
    A = np.zeros((q.size, K, K))
    psi = basis.psi
    for qi, qq in enumerate(q):
        lo, hi = max(-M, qq - M), min(M, qq + M)
        if lo > hi:
            continue
        m = np.arange(lo, hi + 1)
        f = phase_match(m, qq - m)
        left = psi[:, m + M] * f
        right = psi[:, qq - m + M]
        A[qi] = left @ right.T
    return q, A


def timing_tensor(basis: HermiteBasis) -> np.ndarray:
    """``D_ij = sum_m m psi_i(m) psi_j(m)``, summed over ``+-m`` pairs.

    Pairing makes same-parity entries cancel exactly rather than to rounding.
    """
    M = basis.M
    m = np.arange(1, M + 1)
    pos = basis.psi[:, M + 1:]
    neg = basis.psi[:, M - 1::-1]
    terms = pos[:, None, :] * pos[None, :, :] - neg[:, None, :] * neg[None, :, :]
    return (terms * m).sum(axis=-1)


def build_tensors(basis: HermiteBasis, phase_match: PhaseMatch, pump_spectrum) -> CouplingTensors:
    """Coefficient tensors of the mode equations by direct summation."""
    pump = np.asarray(pump_spectrum)
    M = basis.M
    if pump.shape != (4 * M + 1,):
        raise ValueError(f"pump spectrum must cover q = -2M..2M ({4 * M + 1} entries), got {pump.shape}")
    D = timing_tensor(basis)
    q, A = pair_overlaps(basis, phase_match)
    G = np.einsum("q,qij->ij", pump, A)
    L = np.einsum("qij,qkl->ijkl", A, A)
    if not np.iscomplexobj(G):
        G = G.astype(float)
    return CouplingTensors(D=D, G=G, L=L, q=q)


def gaussian_pump_spectrum(N_s: float, M: int, width_factor: float = 1.0) -> np.ndarray:
    """Gaussian pump ``exp(-(q / (sqrt(2) N_s w))**2 / 2)`` over ``q = -2M..2M``.

    With ``w = 1`` this is the second harmonic of the fundamental Hermite mode.
    """
    q = np.arange(-2 * M, 2 * M + 1)
    return np.exp(-0.5 * (q / (math.sqrt(2.0) * N_s * width_factor)) ** 2)


def gain_spectral_radius(G: np.ndarray) -> float:
    """Largest single-pass parametric gain rate of ``G`` acting on ``conj(S)``.

    For ``dS/dt = G conj(S)`` the growth rates are the singular values of ``G``.
    """
    return float(np.linalg.svd(G, compute_uv=False)[0])


# --- model configuration --------------------------------------------------

@dataclass(frozen=True)
class MultimodeParams:
    n_pulses: int = 16
    K_modes: int = 5
    gamma_s: float = 1.0
    Delta: float = 0.0
    DeltaOmega: float = 0.0
    K_nl: float = 0.02
    N_s: float = 10.0
    M: int = 80
    phase_match: PhaseMatch = PhaseMatch()
    pump_width: float = 1.0
    pump_spectrum: tuple | None = None
    xi: float = 0.1
    dt: float = 0.01
    t_end: float = 200.0
    noise_variance: float = 0.25
    divergence_intensity: float = 1e12

    def __post_init__(self):
        if self.dt > 0.05 / self.gamma_s:
            raise ValueError(f"dt={self.dt} exceeds the stability guard 0.05/gamma_s")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least one step")
        if self.K_modes < 1 or self.n_pulses < 1:
            raise ValueError("K_modes and n_pulses must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["phase_match"] = {"kind": self.phase_match.kind, "width": _finite_or_none(self.phase_match.width)}
        if self.pump_spectrum is not None:
            d["pump_spectrum"] = [[complex(v).real, complex(v).imag] for v in self.pump_spectrum]
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "MultimodeParams":
        doc = dict(doc)
        if "phase_match" in doc and isinstance(doc["phase_match"], dict):
            pm = doc["phase_match"]
            width = pm.get("width")
            doc["phase_match"] = PhaseMatch(pm.get("kind", "constant"), math.inf if width is None else width)
        if doc.get("pump_spectrum") is not None:
            doc["pump_spectrum"] = tuple(complex(re, im) for re, im in doc["pump_spectrum"])
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown multimode parameter(s): {sorted(unknown)}")
        return cls(**doc)


def _finite_or_none(v):
    return None if math.isinf(v) else v


def decay_rate_from_cavity(fsr: float, T_s: float) -> float:
    """Signal amplitude decay rate ``Omega T_s / (4 pi)`` from the free spectral range."""
    return fsr * T_s / (4.0 * math.pi)


@dataclass(frozen=True)
class MultimodeModel:
    """Parameters plus the basis and tensors they imply.

    ``G`` is scaled so that ``K_nl * p * G`` has largest gain rate ``gamma_s``
    at ``p = 1``; pump rates are therefore in units of the truncated-model
    oscillation threshold.
    """

    params: MultimodeParams
    basis: HermiteBasis
    tensors: CouplingTensors
    pump_scale: float

    @property
    def G(self) -> np.ndarray:
        return self.tensors.G * self.pump_scale


def build_model(params: MultimodeParams) -> MultimodeModel:
    basis = build_hermite_basis(params.K_modes, params.N_s, params.M)
    if params.pump_spectrum is None:
        pump = gaussian_pump_spectrum(params.N_s, params.M, params.pump_width)
    else:
        pump = np.asarray(params.pump_spectrum)
    tensors = build_tensors(basis, params.phase_match, pump)
    radius = gain_spectral_radius(tensors.G)
    if radius == 0.0:
        raise ValueError("pump spectrum produces no parametric gain")
    scale = params.gamma_s / (params.K_nl * radius)
    return MultimodeModel(params, basis, tensors, scale)


def multimode_drift(S: np.ndarray, model: MultimodeModel, instance: IsingInstance | None,
                    pump_rate: float) -> np.ndarray:
    """Deterministic time derivative for ``S`` of shape ``(..., n_pulses, K)``.

    Straight tensor contractions; the integrator uses a compiled kernel
    that is checked against this function.
    """
    p = model.params
    t = model.tensors
    S = np.asarray(S, dtype=complex)
    Sc = np.conj(S)
    out = -(p.gamma_s + 1j * p.Delta) * S
    out = out - 1j * p.DeltaOmega * np.einsum("ij,...j->...i", t.D, S)
    out = out + p.K_nl * pump_rate * np.einsum("ij,...j->...i", model.G, Sc)
    out = out - 0.25 * p.K_nl ** 2 * np.einsum("ijkl,...j,...k,...l->...i", t.L, Sc, S, S)
    if instance is not None and p.xi != 0.0 and instance.edges:
        Jn = np.sign(instance.coupling_matrix())
        out = out + p.gamma_s * p.xi * np.einsum("ab,...bk->...ak", Jn, S)
    return out


# --- compiled integrator --------------------------------------------------

def _cubic_terms(L: np.ndarray):
    """Compress ``L`` into (i, j, kl-pair, coefficient) rows with k <= l."""
    K = L.shape[0]
    pairs = [(k, l) for k in range(K) for l in range(k, K)]
    rows_i, rows_j, rows_p, coef = [], [], [], []
    scale = max(np.abs(L).max(), 1e-300)
    for i in range(K):
        for j in range(K):
            for pi, (k, l) in enumerate(pairs):
                c = L[i, j, k, l] if k == l else L[i, j, k, l] + L[i, j, l, k]
                if abs(c) > 1e-14 * scale:
                    rows_i.append(i)
                    rows_j.append(j)
                    rows_p.append(pi)
                    coef.append(c)
    pk = np.array([p[0] for p in pairs], dtype=np.int64)
    pl = np.array([p[1] for p in pairs], dtype=np.int64)
    return (np.array(rows_i, dtype=np.int64), np.array(rows_j, dtype=np.int64),
            np.array(rows_p, dtype=np.int64), np.array(coef, dtype=np.float64), pk, pl)


def _group_cubic(L: np.ndarray):
    """CSR layout of the cubic term grouped by output/conjugate pair ``(i, j)``."""
    ci, cj, cp, cc, pk, pl = _cubic_terms(L)
    groups = sorted(set(zip(ci.tolist(), cj.tolist())))
    gi = np.array([g[0] for g in groups], dtype=np.int64)
    gj = np.array([g[1] for g in groups], dtype=np.int64)
    ptr = np.zeros(len(groups) + 1, dtype=np.int64)
    rows_p, rows_c = [], []
    for n_g, (i, j) in enumerate(groups):
        sel = (ci == i) & (cj == j)
        rows_p.extend(cp[sel].tolist())
        rows_c.extend(cc[sel].tolist())
        ptr[n_g + 1] = len(rows_p)
    return gi, gj, ptr, np.array(rows_p, dtype=np.int64), np.array(rows_c), pk, pl


@numba.njit(cache=True)
def _drift_soa(X, Y, DX, DY, linR, linI, GR, GI, pump, cub, gi, gj, ptr, rp, rc, pk, pl,
               nbr, nsign, inj, PR, PI, FR, FI):
    """Drift for all trials at once; arrays are laid out ``(n, K, trials)``."""
    n, K, B = X.shape
    for a in range(n):
        for i in range(K):
            dx = DX[a, i]
            dy = DY[a, i]
            for b in range(B):
                dx[b] = 0.0
                dy[b] = 0.0
            for j in range(K):
                lr = linR[i, j]
                li = linI[i, j]
                gr = pump * GR[i, j]
                gim = pump * GI[i, j]
                if lr == 0.0 and li == 0.0 and gr == 0.0 and gim == 0.0:
                    continue
                xj = X[a, j]
                yj = Y[a, j]
                for b in range(B):
                    # lin * S_j + g * conj(S_j)
                    dx[b] += lr * xj[b] - li * yj[b] + gr * xj[b] + gim * yj[b]
                    dy[b] += lr * yj[b] + li * xj[b] + gim * xj[b] - gr * yj[b]
            for slot in range(nbr.shape[1]):
                w = inj * nsign[a, slot]
                if w == 0.0:
                    continue
                xn = X[nbr[a, slot], i]
                yn = Y[nbr[a, slot], i]
                for b in range(B):
                    dx[b] += w * xn[b]
                    dy[b] += w * yn[b]
        for r in range(pk.shape[0]):
            xk = X[a, pk[r]]
            yk = Y[a, pk[r]]
            xl = X[a, pl[r]]
            yl = Y[a, pl[r]]
            pr = PR[r]
            pi = PI[r]
            for b in range(B):
                pr[b] = xk[b] * xl[b] - yk[b] * yl[b]
                pi[b] = xk[b] * yl[b] + yk[b] * xl[b]
        for g in range(gi.shape[0]):
            for b in range(B):
                FR[b] = 0.0
                FI[b] = 0.0
            for r in range(ptr[g], ptr[g + 1]):
                c = rc[r]
                pr = PR[rp[r]]
                pi = PI[rp[r]]
                for b in range(B):
                    FR[b] += c * pr[b]
                    FI[b] += c * pi[b]
            i = gi[g]
            xj = X[a, gj[g]]
            yj = Y[a, gj[g]]
            dx = DX[a, i]
            dy = DY[a, i]
            for b in range(B):
                # conj(S_j) * F
                dx[b] -= cub * (xj[b] * FR[b] + yj[b] * FI[b])
                dy[b] -= cub * (xj[b] * FI[b] - yj[b] * FR[b])


@numba.njit(cache=True)
def _integrate(X, Y, failed, noise, pumps, dt, noise_amp, guard, linR, linI, GR, GI, cub,
               gi, gj, ptr, rp, rc, pk, pl, nbr, nsign, inj, rec_every, rec_offset, recX, recY):
    """Advance all trials over ``noise.shape[0]`` steps.

    ``pumps[s] = (p(t), p(t + dt/2), p(t + dt))``; ``noise[s, a, k, 0/1, b]``
    are standard normals for the real/imaginary kicks of trial ``b``.
    Snapshots go to ``rec[r]`` whenever ``(rec_offset + s + 1) % rec_every == 0``.
    Failed trials are frozen.
    """
    n, K, B = X.shape
    steps = noise.shape[0]
    K1X = np.empty_like(X)
    K1Y = np.empty_like(X)
    K2X = np.empty_like(X)
    K2Y = np.empty_like(X)
    K3X = np.empty_like(X)
    K3Y = np.empty_like(X)
    K4X = np.empty_like(X)
    K4Y = np.empty_like(X)
    TX = np.empty_like(X)
    TY = np.empty_like(X)
    PR = np.empty((pk.shape[0], B))
    PI = np.empty((pk.shape[0], B))
    FR = np.empty(B)
    FI = np.empty(B)
    inten = np.empty(B)
    half = 0.5 * dt
    sixth = dt / 6.0
    for s in range(steps):
        _drift_soa(X, Y, K1X, K1Y, linR, linI, GR, GI, pumps[s, 0], cub, gi, gj, ptr, rp, rc, pk, pl,
                   nbr, nsign, inj, PR, PI, FR, FI)
        for a in range(n):
            for k in range(K):
                for b in range(B):
                    TX[a, k, b] = X[a, k, b] + half * K1X[a, k, b]
                    TY[a, k, b] = Y[a, k, b] + half * K1Y[a, k, b]
        _drift_soa(TX, TY, K2X, K2Y, linR, linI, GR, GI, pumps[s, 1], cub, gi, gj, ptr, rp, rc, pk, pl,
                   nbr, nsign, inj, PR, PI, FR, FI)
        for a in range(n):
            for k in range(K):
                for b in range(B):
                    TX[a, k, b] = X[a, k, b] + half * K2X[a, k, b]
                    TY[a, k, b] = Y[a, k, b] + half * K2Y[a, k, b]
        _drift_soa(TX, TY, K3X, K3Y, linR, linI, GR, GI, pumps[s, 1], cub, gi, gj, ptr, rp, rc, pk, pl,
                   nbr, nsign, inj, PR, PI, FR, FI)
        for a in range(n):
            for k in range(K):
                for b in range(B):
                    TX[a, k, b] = X[a, k, b] + dt * K3X[a, k, b]
                    TY[a, k, b] = Y[a, k, b] + dt * K3Y[a, k, b]
        _drift_soa(TX, TY, K4X, K4Y, linR, linI, GR, GI, pumps[s, 2], cub, gi, gj, ptr, rp, rc, pk, pl,
                   nbr, nsign, inj, PR, PI, FR, FI)
        for a in range(n):
            for b in range(B):
                inten[b] = 0.0
            for k in range(K):
                for b in range(B):
                    vx = X[a, k, b] + sixth * (K1X[a, k, b] + 2.0 * K2X[a, k, b] + 2.0 * K3X[a, k, b] + K4X[a, k, b])
                    vy = Y[a, k, b] + sixth * (K1Y[a, k, b] + 2.0 * K2Y[a, k, b] + 2.0 * K3Y[a, k, b] + K4Y[a, k, b])
                    TX[a, k, b] = vx + noise_amp * noise[s, a, k, 0, b]
                    TY[a, k, b] = vy + noise_amp * noise[s, a, k, 1, b]
                    inten[b] += TX[a, k, b] * TX[a, k, b] + TY[a, k, b] * TY[a, k, b]
            for b in range(B):
                if not (inten[b] < guard):
                    failed[b] = True
        # commit the step only for trials that are still healthy
        for a in range(n):
            for k in range(K):
                for b in range(B):
                    if not failed[b]:
                        X[a, k, b] = TX[a, k, b]
                        Y[a, k, b] = TY[a, k, b]
        g = rec_offset + s + 1
        if g % rec_every == 0:
            r = g // rec_every - 1
            if r < recX.shape[0]:
                for a in range(n):
                    for k in range(recX.shape[2]):
                        for b in range(B):
                            recX[r, a, k, b] = X[a, k, b]
                            recY[r, a, k, b] = Y[a, k, b]


def noise_draws_per_step(n_pulses: int, K_modes: int) -> int:
    """Standard normals consumed per trial per step: (pulse, mode, re/im) in C order."""
    return 2 * n_pulses * K_modes


@dataclass
class MultimodeTrajectory:
    t: np.ndarray
    S: np.ndarray  # (records, n, K)

    def intensity(self) -> np.ndarray:
        return np.abs(self.S) ** 2


@dataclass
class MultimodeTrial:
    S: np.ndarray
    spins: np.ndarray
    energy: float
    flags: list[str]
    trajectory: MultimodeTrajectory | None = None

    @property
    def failed_numeric(self) -> bool:
        return "failed-numeric" in self.flags


class _Kernel:
    def __init__(self, model: MultimodeModel, instance: IsingInstance | None):
        p = model.params
        K = p.K_modes
        lin = -(p.gamma_s + 1j * p.Delta) * np.eye(K) - 1j * p.DeltaOmega * model.tensors.D
        G = p.K_nl * np.asarray(model.G, dtype=complex)
        self.linR, self.linI = np.ascontiguousarray(lin.real), np.ascontiguousarray(lin.imag)
        self.GR, self.GI = np.ascontiguousarray(G.real), np.ascontiguousarray(G.imag)
        self.cub = 0.25 * p.K_nl ** 2
        self.gi, self.gj, self.ptr, self.rp, self.rc, self.pk, self.pl = _group_cubic(model.tensors.L)
        n = p.n_pulses
        if instance is None or not instance.edges:
            self.nbr = np.zeros((n, 0), np.int64)
            self.nsign = np.zeros((n, 0))
        else:
            idx, sign = instance.neighbor_table()
            self.nbr = idx.astype(np.int64)
            self.nsign = sign.astype(np.float64)
        self.inj = p.gamma_s * p.xi

    def tables(self):
        return (self.linR, self.linI, self.GR, self.GI)

    def cubic(self):
        return (self.gi, self.gj, self.ptr, self.rp, self.rc, self.pk, self.pl)

    def drift(self, S: np.ndarray, pump: float) -> np.ndarray:
        """Drift of states ``S`` shaped ``(trials, n, K)``."""
        X = np.ascontiguousarray(np.moveaxis(S.real, 0, -1))
        Y = np.ascontiguousarray(np.moveaxis(S.imag, 0, -1))
        DX, DY = np.empty_like(X), np.empty_like(X)
        B = X.shape[-1]
        PR = np.empty((self.pk.shape[0], B))
        PI = np.empty_like(PR)
        _drift_soa(X, Y, DX, DY, *self.tables(), pump, self.cub, *self.cubic(), self.nbr, self.nsign,
                   self.inj, PR, PI, np.empty(B), np.empty(B))
        return np.moveaxis(DX + 1j * DY, -1, 0)


def compiled_drift(S, model: MultimodeModel, instance: IsingInstance | None, pump_rate: float) -> np.ndarray:
    """The integrator's drift for a single ``(n, K)`` state."""
    S = np.asarray(S, dtype=complex)
    return _Kernel(model, instance).drift(S[None], float(pump_rate))[0]


def _pump_table(schedule: PumpSchedule, t0: float, dt: float, steps: int) -> np.ndarray:
    t = t0 + dt * np.arange(steps)
    out = np.empty((steps, 3))
    for c, off in enumerate((0.0, 0.5 * dt, dt)):
        out[:, c] = [evaluate_schedule(schedule, tt + off) for tt in t]
    return out


def simulate_multimode(model: MultimodeModel, instance: IsingInstance | None, schedule: PumpSchedule,
                       rngs, record_stride: int | None = None, chunk_steps: int = 50,
                       record_modes: int | None = None, initial=None):
    """Integrate a batch of independent trials, one noise source per trial.

    Each entry of ``rngs`` must provide ``standard_normal(size)``; per step a
    trial consumes ``2 * n * K`` draws ordered (pulse, mode, re/im).  A
    trial's result depends only on its own source, never on the batch.
    Returns ``(S_final, failed, records)`` with ``S_final`` shaped
    ``(trials, n, K)`` and ``records`` shaped ``(trials, n_records, n, K)``
    or ``None``.  ``record_modes`` keeps only the lowest modes in records.
    ``initial`` overrides the vacuum start ``S = 0`` with an ``(n, K)`` or
    ``(trials, n, K)`` state.
    """
    p = model.params
    if instance is not None and instance.n != p.n_pulses:
        raise ValueError(f"instance has n={instance.n} but n_pulses={p.n_pulses}")
    kern = _Kernel(model, instance)
    B, n, K = len(rngs), p.n_pulses, p.K_modes
    steps = p.n_steps
    if record_stride is not None:
        if record_stride < 1 or record_stride > steps:
            raise ValueError(f"record stride {record_stride} must be in [1, {steps}] steps")
        n_rec, every = steps // record_stride, record_stride
    else:
        n_rec, every = 0, steps + 1
    kr = K if record_modes is None else min(K, record_modes)
    recX = np.zeros((n_rec, n, kr, B))
    recY = np.zeros((n_rec, n, kr, B))
    if initial is None:
        X = np.zeros((n, K, B))
        Y = np.zeros((n, K, B))
    else:
        S0 = np.broadcast_to(np.asarray(initial, dtype=complex), (B, n, K))
        X = np.array(np.moveaxis(S0.real, 0, -1), order="C")
        Y = np.array(np.moveaxis(S0.imag, 0, -1), order="C")
    failed = np.zeros(B, dtype=np.bool_)
    noise_amp = math.sqrt(2.0 * p.gamma_s * p.dt * p.noise_variance)
    noise = np.empty((chunk_steps, n, K, 2, B))
    for start in range(0, steps, chunk_steps):
        cs = min(chunk_steps, steps - start)
        buf = noise[:cs]
        for b, g in enumerate(rngs):
            buf[..., b] = g.standard_normal((cs, n, K, 2))
        pumps = _pump_table(schedule, start * p.dt, p.dt, cs)
        _integrate(X, Y, failed, buf, pumps, p.dt, noise_amp, p.divergence_intensity, *kern.tables(),
                   kern.cub, *kern.cubic(), kern.nbr, kern.nsign, kern.inj, every, start, recX, recY)
    S = np.moveaxis(X + 1j * Y, -1, 0)
    rec = np.moveaxis(recX + 1j * recY, -1, 0) if record_stride is not None else None
    return S, failed, rec


def readout_spins(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spins ``sign(Re S_0)`` with ties read as +1; also returns the tie mask."""
    re = np.real(np.asarray(S)[..., 0])
    return np.where(re < 0, -1, 1).astype(np.int8), re == 0


def run_multimode_trial(model: MultimodeModel, instance: IsingInstance, schedule: PumpSchedule,
                        rng, record_stride: int | None = None) -> MultimodeTrial:
    S, failed, rec = simulate_multimode(model, instance, schedule, [rng], record_stride)
    return _trial_from_state(model, instance, S[0], bool(failed[0]), None if rec is None else rec[0], record_stride)


def _trial_from_state(model, instance, S, failed, rec, stride) -> MultimodeTrial:
    spins, ties = readout_spins(S)
    flags = []
    if failed:
        flags.append("failed-numeric")
    if ties.any():
        flags.append("degenerate-readout")
    traj = None
    if rec is not None:
        dt = model.params.dt
        t = dt * stride * np.arange(1, rec.shape[0] + 1)
        traj = MultimodeTrajectory(t=t, S=rec)
    return MultimodeTrial(S=S, spins=spins, energy=ising_energy(instance, spins), flags=flags, trajectory=traj)


# --- flip analysis --------------------------------------------------------

@dataclass
class FlipEvent:
    pulse: int
    time: float
    direction: int
    min_total_intensity: float
    peak_higher_intensity: float
    pre_higher_mean: float

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.__dict__.items()}


def flip_events(trajectory: MultimodeTrajectory, pulse: int, t_skip: float = 0.0,
                window: float = 2.0, hysteresis: float = 0.0) -> list[FlipEvent]:
    """Zero crossings of ``Re S_0`` of one pulse after ``t_skip``.

    A crossing is registered when the real part passes from beyond ``-h`` to
    beyond ``+h`` (or back), ``h = hysteresis``.  For each, the window of
    half-width ``window`` around the crossing gives the minimum total pulse
    intensity and the peak of the higher-mode intensity ``sum_{k>=1}|S_k|^2``;
    the mean higher-mode intensity over the preceding window is the baseline.
    """
    t = np.asarray(trajectory.t)
    if t.size == 0:
        raise ValueError("empty trajectory")
    S = np.asarray(trajectory.S)[:, pulse, :]
    re0 = S[:, 0].real
    inten = np.abs(S) ** 2
    total = inten.sum(axis=1)
    higher = inten[:, 1:].sum(axis=1)
    events = []
    state = 0
    last_idx = None
    for idx in range(t.size):
        v = re0[idx]
        new = 1 if v > hysteresis else (-1 if v < -hysteresis else 0)
        if new == 0:
            continue
        if state != 0 and new != state and t[idx] >= t_skip:
            prev = last_idx
            # locate the zero between the last committed sample and this one
            seg = re0[prev:idx + 1]
            sign_change = np.nonzero(np.sign(seg[:-1]) != np.sign(seg[1:]))[0]
            c = prev + (sign_change[-1] if sign_change.size else 0)
            a, b = re0[c], re0[c + 1]
            frac = a / (a - b) if a != b else 0.0
            tc = t[c] + frac * (t[c + 1] - t[c])
            win = (t >= tc - window) & (t <= tc + window)
            pre = (t >= tc - 2 * window) & (t < tc - window)
            events.append(FlipEvent(
                pulse=pulse,
                time=float(tc),
                direction=int(new),
                min_total_intensity=float(total[win].min()),
                peak_higher_intensity=float(higher[win].max()),
                pre_higher_mean=float(higher[pre].mean()) if pre.any() else float("nan"),
            ))
        state = new
        last_idx = idx
    return events
