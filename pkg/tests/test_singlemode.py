import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from dopocim import singlemode as sm
from dopocim.harness import NegatedNoise, ZeroNoise, trial_rng
from dopocim.ising import IsingInstance, ising_energy, make_named_instance
from dopocim.presets import SINGLEMODE_CALIBRATED
from dopocim.schedule import PumpSchedule, evaluate_schedule
from dopocim.singlemode import (
    Injector,
    SingleModeParams,
    injection_couple,
    out_couple,
    parametric_gain_step,
    simulate_singlemode,
    small_signal_gain,
)

FERRO = make_named_instance("ferro-ring-16")
AFM = make_named_instance("antiferro-ring-16")
CUBIC = make_named_instance("cubic-16")
EMPTY16 = IsingInstance(n=16, edges=())


def rngs(k, seed=5):
    return [trial_rng(seed, i) for i in range(k)]


# --- schedule ----------------------------------------------------------------

def test_schedule_values():
    assert evaluate_schedule(PumpSchedule.abrupt(2.7), 0) == 2.7
    ramp = PumpSchedule.linear(1.0, 2.7, 10000)
    assert evaluate_schedule(ramp, 0) == 1.0
    assert evaluate_schedule(ramp, 5000) == pytest.approx(1.85)
    assert evaluate_schedule(ramp, 10000) == pytest.approx(2.7)
    assert evaluate_schedule(ramp, 50000) == pytest.approx(2.7)


@pytest.mark.parametrize("kw", [dict(kind="cosine"), dict(p_start=-1.0), dict(kind="linear", ramp=0.5)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        PumpSchedule(**kw)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.integers(1, 20000), st.integers(0, 40000))
def test_linear_schedule_stays_between_endpoints(p0, p1, ramp, t):
    p = evaluate_schedule(PumpSchedule.linear(p0, p1, ramp), t)
    assert min(p0, p1) - 1e-12 <= p <= max(p0, p1) + 1e-12


# --- params ------------------------------------------------------------------

def test_params_loss_invariant():
    SingleModeParams(T_s=0.1, R_inj=0.075).check_instance(CUBIC)
    with pytest.raises(ValueError, match="passive loss"):
        SingleModeParams(T_s=0.5, R_inj=0.2).check_instance(CUBIC)
    with pytest.raises(ValueError):
        SingleModeParams(rounds=10, readout_round=11)
    with pytest.raises(ValueError):
        SingleModeParams(gain_form="cubic")


def test_params_round_trip():
    p = SingleModeParams(T_s=0.2, x_sat=3.0, gain_form="exp-pump", readout_round=7, rounds=9)
    assert SingleModeParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError, match="unknown"):
        SingleModeParams.from_dict({"Ts": 0.1})


# --- out-coupling ------------------------------------------------------------

def test_out_couple_deterministic_branch():
    assert np.all(out_couple(np.zeros(4), 0.3, np.zeros(4)) == 0.0)
    assert out_couple(np.ones(1), 0.1, np.zeros(1))[0] == pytest.approx(0.9486832980505138)
    with pytest.raises(ValueError):
        out_couple(np.ones(2), 1.0, np.zeros(2))


def test_out_couple_variance_bookkeeping():
    rng = np.random.default_rng(11)
    n = 100_000
    y = out_couple(np.zeros(n), 0.1, rng.standard_normal(n), variance=0.25)
    target = 0.1 * 0.25
    # standard error of a Gaussian sample variance is var * sqrt(2/(n-1))
    se = target * math.sqrt(2.0 / (n - 1))
    assert abs(y.var(ddof=1) - target) < 3 * se


# --- gain --------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 4), st.floats(1.0, 2.0), st.floats(0.1, 10),
       st.sampled_from(sm.GAIN_FORMS))
def test_gain_odd_and_sign_preserving(x, p, g, xs, form):
    a = parametric_gain_step(np.array([x]), p, g, xs, form)[0]
    b = parametric_gain_step(np.array([-x]), p, g, xs, form)[0]
    assert a == -b
    assert a == 0.0 or np.sign(a) == np.sign(x) or p == 0.0


@pytest.mark.parametrize("form", sm.GAIN_FORMS)
def test_gain_at_threshold_is_loss_cancelling(form):
    params = SingleModeParams(T_s=0.1, R_inj=0.075)
    g_th = params.threshold_gain(CUBIC)
    # with the coupler and the tap-off loss the round trip is exactly neutral
    net = small_signal_gain(g_th, 1.0, form) * math.sqrt(0.9) * math.sqrt(1 - 3 * 0.075)
    assert net == pytest.approx(1.0, abs=1e-14)
    x = 1e-4
    y = parametric_gain_step(np.array([x]), 1.0, g_th, 1.0, form)[0]
    assert y / (g_th * x) == pytest.approx(1.0, abs=2 * x * x)
    assert parametric_gain_step(np.zeros(3), 2.7, g_th)[0] == 0.0


def test_gain_forms():
    assert small_signal_gain(1.2, 2.25, "sqrt-pump") == pytest.approx(1.8)
    assert small_signal_gain(1.2, 2.25, "exp-pump") == pytest.approx(1.2 ** 1.5)
    with pytest.raises(ValueError):
        small_signal_gain(1.2, -1.0)


def test_uncoupled_fixed_point():
    params = SingleModeParams(T_s=0.1, R_inj=0.0, x_sat=1.0, rounds=2000)
    g = small_signal_gain(params.threshold_gain(EMPTY16), 2.7)
    root = brentq(lambda x: g / (1 + x * x) * math.sqrt(0.9) - 1.0, 1e-9, 10)
    batch = simulate_singlemode(params, EMPTY16, PumpSchedule.abrupt(2.7), rngs(20))
    assert np.abs(batch.x).mean() == pytest.approx(root, rel=0.05)


# --- injection ---------------------------------------------------------------

def test_injection_identity_without_reflection():
    x = np.random.default_rng(0).standard_normal(16)
    assert np.array_equal(injection_couple(x, CUBIC, 0.0), x)


def test_injection_circulant_eigenvectors():
    R, a = 0.075, 0.7
    factor = math.sqrt(1 - 2 * R) + 2 * math.sqrt(R)
    out = injection_couple(np.full(16, a), FERRO, R)
    np.testing.assert_allclose(out, factor * a, rtol=1e-14)
    alt = a * np.array([1.0, -1.0] * 8)
    np.testing.assert_allclose(injection_couple(alt, AFM, R), factor * alt, rtol=1e-14)


def test_injection_matches_dense_matrix():
    R = 0.05
    J = np.sign(CUBIC.coupling_matrix())
    M = np.diag(np.sqrt(1 - CUBIC.degrees * R)) + math.sqrt(R) * J
    x = np.random.default_rng(2).standard_normal((3, 16))
    np.testing.assert_allclose(injection_couple(x, CUBIC, R), x @ M.T, rtol=1e-13, atol=1e-15)
    Rn = R / 3
    Mn = np.diag(np.sqrt(1 - CUBIC.degrees * Rn)) + math.sqrt(Rn) * J
    np.testing.assert_allclose(injection_couple(x, CUBIC, R, normalize_by_degree=True), x @ Mn.T, rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(16))), st.integers(0, 2 ** 32 - 1))
def test_injection_permutation_equivariant(perm, seed):
    perm = np.array(perm)
    inv = np.argsort(perm)
    # vertex v of the relabelled graph is vertex perm[v] of the original
    edges = tuple(sorted((min(inv[i], inv[j]), max(inv[i], inv[j]), w) for i, j, w in CUBIC.edges))
    relabelled = IsingInstance(16, edges)
    x = np.random.default_rng(seed).standard_normal(16)
    a = injection_couple(x, CUBIC, 0.075)[perm]
    b = injection_couple(x[perm], relabelled, 0.075)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)


def test_injection_dimension_mismatch():
    with pytest.raises(ValueError, match="pulses"):
        Injector(CUBIC, 0.05)(np.zeros(15))


# --- full map ------------------------------------------------------------------

def reference_round_trip(params, instance, schedule, gen, rounds):
    """Per-pulse loop implementation of out-couple -> gain -> inject."""
    n = instance.n
    g_th = params.threshold_gain(instance)
    R = params.R_inj
    nbrs = [[] for _ in range(n)]
    for i, j, w in instance.edges:
        nbrs[i].append((j, np.sign(w)))
        nbrs[j].append((i, np.sign(w)))
    x = [0.0] * n
    for r in range(rounds):
        w = gen.standard_normal(n)
        p = evaluate_schedule(schedule, r)
        g = small_signal_gain(g_th, p, params.gain_form)
        y = []
        for i in range(n):
            v = math.sqrt(1 - params.T_s) * x[i] + math.sqrt(params.T_s * params.vacuum_variance) * w[i]
            y.append(g * v / (1 + (v / params.x_sat) ** 2))
        x = [math.sqrt(1 - len(nbrs[i]) * R) * y[i] + math.sqrt(R) * sum(s * y[j] for j, s in nbrs[i])
             for i in range(n)]
    return np.array(x)


@pytest.mark.parametrize("form", sm.GAIN_FORMS)
def test_map_matches_reference_loop(form):
    params = SingleModeParams(rounds=150, gain_form=form)
    sched = PumpSchedule.linear(1.0, 2.7, 100)
    batch = simulate_singlemode(params, CUBIC, sched, [trial_rng(9, 0)], chunk_rounds=37)
    ref = reference_round_trip(params, CUBIC, sched, trial_rng(9, 0), 150)
    np.testing.assert_allclose(batch.x[0], ref, rtol=1e-11, atol=1e-12)


def test_zero_noise_stays_at_origin():
    params = SingleModeParams(rounds=500, vacuum_variance=0.0)
    batch = simulate_singlemode(params, CUBIC, PumpSchedule.abrupt(2.7), rngs(3), record_stride=100)
    assert np.all(batch.x == 0.0)
    assert batch.record_degenerate.all()


def test_deterministic_for_fixed_seed():
    params = SingleModeParams(rounds=300)
    a = simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(4, 77), record_stride=50)
    b = simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(4, 77), record_stride=50)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.record_energy, b.record_energy)


def test_trial_independent_of_batch_composition():
    params = SingleModeParams(rounds=200)
    full = simulate_singlemode(params, CUBIC, PumpSchedule.abrupt(2.7), rngs(5, 3))
    one = simulate_singlemode(params, CUBIC, PumpSchedule.abrupt(2.7), [trial_rng(3, 2)])
    assert np.array_equal(full.x[2], one.x[0])


@pytest.mark.parametrize("instance", [FERRO, CUBIC])
@pytest.mark.parametrize("form", sm.GAIN_FORMS)
def test_mirror_symmetry_bit_exact(instance, form):
    params = SingleModeParams(rounds=400, gain_form=form)
    sched = PumpSchedule.linear(1.0, 2.7, 300)
    a = simulate_singlemode(params, instance, sched, rngs(3, 21), record_stride=10, keep_states=True)
    b = simulate_singlemode(params, instance, sched, [NegatedNoise(g) for g in rngs(3, 21)], record_stride=10,
                            keep_states=True)
    assert np.array_equal(a.record_states, -b.record_states)
    assert np.array_equal(a.x, -b.x)


def test_uncoupled_pulses_are_unbiased():
    params = SingleModeParams(R_inj=0.0, rounds=300)
    batch = simulate_singlemode(params, EMPTY16, PumpSchedule.abrupt(2.7), rngs(250, 8))
    signs = np.sign(batch.x).ravel()
    assert abs(signs.mean()) < 3 / math.sqrt(signs.size)
    # bimodal: almost no mass near the unstable origin
    assert (np.abs(batch.x) < 0.2).mean() < 0.01


def test_ferro_abrupt_histogram_supported_on_ground_and_two_walls():
    params = SingleModeParams.from_dict({**SINGLEMODE_CALIBRATED, "rounds": 10000})
    batch = simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(200, 4))
    e = ising_energy(FERRO, np.where(batch.x < 0, -1, 1))
    assert np.isin(e, [-16, -12]).mean() >= 0.99


def test_record_stride_validation():
    params = SingleModeParams(rounds=100)
    with pytest.raises(ValueError, match="stride"):
        simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(1), record_stride=101)
    b = simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(2), record_stride=30)
    assert b.record_rounds.tolist() == [30, 60, 90]
    assert b.record_energy.shape == (2, 3)


def test_readout_round_truncates_run():
    params = SingleModeParams(rounds=100, readout_round=40)
    a = simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(1))
    b = simulate_singlemode(SingleModeParams(rounds=40), FERRO, PumpSchedule.abrupt(2.7), rngs(1))
    assert np.array_equal(a.x, b.x)


def test_divergence_guard_marks_and_freezes(monkeypatch):
    monkeypatch.setattr(sm, "divergence_bound", lambda *a, **k: 0.5)
    params = SingleModeParams(rounds=200)
    batch = simulate_singlemode(params, FERRO, PumpSchedule.abrupt(2.7), rngs(3))
    assert batch.failed.all()
    assert np.all(np.abs(batch.x) < 0.5)


def test_readout_tie_convention():
    spins, ties = sm.readout(np.array([0.3, 0.0, -0.2]))
    assert spins.tolist() == [1, 1, -1]
    assert ties.tolist() == [False, True, False]


def test_zero_noise_source_helper():
    params = SingleModeParams(rounds=50)
    b = simulate_singlemode(params, CUBIC, PumpSchedule.abrupt(2.7), [ZeroNoise()])
    assert np.all(b.x == 0.0)
