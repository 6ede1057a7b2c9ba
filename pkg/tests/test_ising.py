import itertools
import json
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dopocim.ising import (
    NAMED_INSTANCES,
    InstanceError,
    IsingInstance,
    ResourceLimitError,
    SpectrumSummary,
    brute_force_spectrum,
    domain_wall_count,
    ising_energy,
    make_named_instance,
    parse_instance,
    serialize_instance,
    spins_from_str,
    spins_to_str,
)


def naive_energy(edges, s):
    return -sum(w * s[i] * s[j] for i, j, w in edges)


def naive_spectrum(n, edges):
    """Reference enumeration with plain Python loops."""
    configs = [np.array(c) for c in itertools.product((1, -1), repeat=n)]
    energies = [naive_energy(edges, c) for c in configs]
    eg = min(energies)
    ground = {spins_to_str(c) for c, e in zip(configs, energies) if abs(e - eg) < 1e-9}
    strict, nonstrict = set(), set()
    for c, e in zip(configs, energies):
        deltas = []
        for i in range(n):
            d = c.copy()
            d[i] = -d[i]
            deltas.append(naive_energy(edges, d) - e)
        if all(x > 1e-9 for x in deltas):
            strict.add(spins_to_str(c))
        if all(x >= -1e-9 for x in deltas):
            nonstrict.add(spins_to_str(c))
    return eg, ground, strict, nonstrict, energies


@st.composite
def instances(draw, max_n=7):
    n = draw(st.integers(2, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    weights = st.one_of(st.sampled_from([-1.0, 1.0]), st.floats(-2, 2).filter(lambda w: abs(w) > 0.05))
    edges = tuple((i, j, draw(weights)) for i, j in sorted(chosen))
    return IsingInstance(n=n, edges=edges, name="random")


# --- named instances --------------------------------------------------------

def test_named_instance_structure():
    ferro = make_named_instance("ferro-ring-16")
    assert len(ferro.edges) == 16 and all(w == 1.0 for *_, w in ferro.edges)
    afm = make_named_instance("antiferro-ring-16")
    assert all(w == -1.0 for *_, w in afm.edges)
    cubic = make_named_instance("cubic-16")
    assert len(cubic.edges) == 24
    assert np.all(cubic.degrees == 3)
    k4 = make_named_instance("cubic-4")
    assert len(k4.edges) == 6 and np.all(k4.degrees == 3)


def test_unknown_name_lists_valid_names():
    with pytest.raises(KeyError) as err:
        make_named_instance("petersen")
    for name in NAMED_INSTANCES:
        assert name in str(err.value)


def test_ground_energies_of_benchmarks():
    expected = {"ferro-ring-16": (-16, 2), "antiferro-ring-16": (-16, 2), "cubic-16": (-20, 16), "cubic-4": (-2, 6)}
    for name, (eg, deg) in expected.items():
        t0 = time.perf_counter()
        spec = brute_force_spectrum(make_named_instance(name))
        assert time.perf_counter() - t0 < 2.0
        assert spec.ground_energy == eg
        assert spec.degeneracy == deg


def test_ring_first_excited_level_is_two_walls():
    for name in ("ferro-ring-16", "antiferro-ring-16"):
        inst = make_named_instance(name)
        spec = brute_force_spectrum(inst)
        assert spec.excited_levels()[1] == -12
        # 16 choose 2 wall positions, times the global flip
        assert spec.energy_histogram[-12.0] == 240
        codes = np.arange(1 << 16)
        s = 1 - 2 * ((codes[:, None] >> np.arange(16)) & 1)
        e = ising_energy(inst, s)
        for cfg in s[e == -12]:
            assert domain_wall_count(inst, cfg) == 2


def test_cubic16_local_minima_census():
    spec = brute_force_spectrum(make_named_instance("cubic-16"))
    counts = spec.local_minima_counts()
    assert counts == {"strict": 50, "nonstrict": 50, "strict_excluding_ground": 34, "nonstrict_excluding_ground": 34}


def test_spectrum_matches_naive_oracle_on_cubic4():
    inst = make_named_instance("cubic-4")
    eg, ground, strict, nonstrict, energies = naive_spectrum(4, inst.edges)
    spec = brute_force_spectrum(inst)
    assert spec.ground_energy == eg
    assert {spins_to_str(s) for s in spec.ground_states} == ground
    assert {spins_to_str(s) for s in spec.local_minima_strict} == strict
    assert {spins_to_str(s) for s in spec.local_minima_nonstrict} == nonstrict


@settings(max_examples=60, deadline=None)
@given(instances())
def test_spectrum_matches_naive_oracle(inst):
    eg, ground, strict, nonstrict, energies = naive_spectrum(inst.n, inst.edges)
    spec = brute_force_spectrum(inst)
    assert spec.ground_energy == pytest.approx(eg, abs=1e-9)
    assert {spins_to_str(s) for s in spec.ground_states} == ground
    assert {spins_to_str(s) for s in spec.local_minima_strict} == strict
    assert {spins_to_str(s) for s in spec.local_minima_nonstrict} == nonstrict
    assert sum(spec.energy_histogram.values()) == 2 ** inst.n


@settings(max_examples=40, deadline=None)
@given(instances())
def test_spectrum_sets_closed_under_global_flip(inst):
    spec = brute_force_spectrum(inst)
    for rows in (spec.ground_states, spec.local_minima_strict, spec.local_minima_nonstrict):
        keys = {spins_to_str(s) for s in rows}
        assert keys == {spins_to_str(-s) for s in rows}
    assert set(map(spins_to_str, spec.local_minima_strict)) <= set(map(spins_to_str, spec.local_minima_nonstrict))


@settings(max_examples=50, deadline=None)
@given(instances(), st.data())
def test_energy_invariant_under_global_flip(inst, data):
    s = np.array(data.draw(st.lists(st.sampled_from([1, -1]), min_size=inst.n, max_size=inst.n)))
    assert ising_energy(inst, s) == pytest.approx(ising_energy(inst, -s))
    assert ising_energy(inst, s) == pytest.approx(naive_energy(inst.edges, s))


def test_batched_energy_matches_scalar():
    inst = make_named_instance("cubic-16")
    rng = np.random.default_rng(3)
    s = rng.choice([-1, 1], size=(5, 7, 16))
    batch = ising_energy(inst, s)
    assert batch.shape == (5, 7)
    assert batch[2, 3] == ising_energy(inst, s[2, 3])


def test_energy_rejects_bad_spins():
    inst = make_named_instance("cubic-4")
    with pytest.raises(ValueError):
        ising_energy(inst, [1, 0, 1, -1])
    with pytest.raises(ValueError):
        ising_energy(inst, [1, 1, 1])


def test_domain_walls_need_a_ring():
    with pytest.raises(ValueError):
        domain_wall_count(make_named_instance("cubic-16"), np.ones(16))
    ferro = make_named_instance("ferro-ring-16")
    assert domain_wall_count(ferro, np.ones(16)) == 0
    alt = np.array([1, -1] * 8)
    assert domain_wall_count(make_named_instance("antiferro-ring-16"), alt) == 0
    assert domain_wall_count(ferro, alt) == 16


# --- validation and serialization ----------------------------------------

@pytest.mark.parametrize("edges, fragment", [
    (((0, 0, 1.0),), "self-loop"),
    (((0, 1, 1.0), (0, 1, -1.0)), "duplicate"),
    (((0, 5, 1.0),), "0 <= i < j"),
    (((1, 0, 1.0),), "0 <= i < j"),
    (((0, 1, 0.0),), "nonzero"),
    (((0, 1, float("nan")),), "finite"),
])
def test_invalid_edges_rejected(edges, fragment):
    with pytest.raises(InstanceError, match=fragment):
        IsingInstance(n=3, edges=edges)


def test_parse_errors_carry_location():
    with pytest.raises(InstanceError, match="line 1"):
        parse_instance('{"n": 3, "edges": [}')
    with pytest.raises(InstanceError, match=r"edges\[1\]"):
        parse_instance('{"n": 3, "edges": [[0, 1, 1], [1, 2]]}')
    with pytest.raises(InstanceError, match="n"):
        parse_instance('{"edges": []}')


@settings(max_examples=40, deadline=None)
@given(instances())
def test_serialization_round_trip(inst):
    back = parse_instance(serialize_instance(inst))
    assert back == inst
    assert json.loads(serialize_instance(back)) == json.loads(serialize_instance(inst))


def test_spectrum_summary_round_trip():
    spec = brute_force_spectrum(make_named_instance("cubic-4"))
    back = SpectrumSummary.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert back.ground_energy == spec.ground_energy
    assert back.degeneracy == spec.degeneracy
    assert back.local_minima_counts() == spec.local_minima_counts()
    assert back.energy_histogram == spec.energy_histogram


def test_spin_string_round_trip():
    s = np.array([1, -1, -1, 1], dtype=np.int8)
    assert spins_to_str(s) == "+--+"
    assert np.array_equal(spins_from_str("+--+"), s)
    with pytest.raises(ValueError):
        spins_from_str("+0-")


def test_enumeration_guard():
    big = IsingInstance(n=25, edges=((0, 1, 1.0),))
    with pytest.raises(ResourceLimitError, match="25"):
        brute_force_spectrum(big)


def test_neighbor_table_is_sorted_and_padded():
    inst = IsingInstance(n=4, edges=((0, 3, -2.0), (0, 1, 1.0)))
    idx, sign = inst.neighbor_table()
    assert idx.shape == (4, 2)
    assert list(idx[0]) == [1, 3] and list(sign[0]) == [1.0, -1.0]
    assert sign[2].tolist() == [0.0, 0.0]
