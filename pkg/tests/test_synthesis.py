from __future__ import annotations

import json

import numpy as np
import pytest

from qfilt.dynamics import adiabatic_coupling_error
from qfilt.oscillator import GeneralizedOpenOscillator
from qfilt.synthesis import (
    C_LIGHT,
    InteractionTerm,
    OneModeRealization,
    decompose_network,
    hardware_table,
    interaction_hamiltonian_matrix,
    map_crystal_params,
    realization_from_doc,
    realization_to_doc,
    realize_coupling,
    realize_interaction,
    realize_internal,
    reassemble_omega,
    required_squeezing,
    required_squeezing_rounded,
    synthesize,
    transmissivity_for_bandwidth,
)

from oracles import random_goo_parts


def unstable_goo(s0=1.0):
    return GeneralizedOpenOscillator(np.eye(1), [[0, -np.sqrt(2 * s0)]], np.zeros((2, 2)))


def test_decompose_single_mode():
    parts, inter, series = decompose_network(unstable_goo())
    assert len(parts) == 1 and inter == [] and series == [0]


def test_decompose_block_diagonal_one_coupled():
    Om = np.zeros((4, 4), complex)
    Om[2:, 2:] = np.diag([0.3, 0.3])
    goo = GeneralizedOpenOscillator(np.eye(1), [[1.0, 0, 0, 0]], Om)
    parts, inter, series = decompose_network(goo)
    assert len(parts) == 2 and inter == [] and series == [0]
    np.testing.assert_allclose(parts[1].Omega, np.diag([0.3, 0.3]))


def test_decompose_beam_splitter_term():
    c = 0.4 - 0.25j
    Om = np.zeros((4, 4), complex)
    Om[0, 2], Om[2, 0] = c / 2, np.conj(c) / 2
    Om[1, 3], Om[3, 1] = np.conj(c) / 2, c / 2
    goo = GeneralizedOpenOscillator(np.eye(1), [[1.0, 0, 0, 0]], Om)
    parts, inter, _ = decompose_network(goo)
    assert len(inter) == 1
    assert inter[0].mode_pair == (0, 1)
    assert inter[0].eps2 == pytest.approx(c) and inter[0].eps1 == pytest.approx(0)
    np.testing.assert_allclose(reassemble_omega(parts, inter), Om, atol=1e-15)


def test_decompose_random_reconstruction():
    rng = np.random.default_rng(5)
    for _ in range(20):
        S, K, Om = random_goo_parts(rng, 3, 2)
        goo = GeneralizedOpenOscillator(S, K, Om)
        parts, inter, series = decompose_network(goo)
        np.testing.assert_allclose(reassemble_omega(parts, inter), Om, atol=1e-12)
        np.testing.assert_allclose(np.hstack([p.K for p in parts]), K, atol=0)
        assert series == [0, 1, 2]
        np.testing.assert_array_equal(parts[0].S, S)
        for p in parts[1:]:
            np.testing.assert_array_equal(p.S, np.eye(2))


def test_realize_coupling_unstable_filter():
    s0, gamma = 1.0, 100.0
    f = realize_coupling([0, -np.sqrt(2 * s0)], gamma)
    assert f["pump_intensity_1"] == pytest.approx(-np.sqrt(s0 * gamma))
    assert f["pump_intensity_2"] == 0
    assert f["mixing_angle"] == 0 and f["phase"] == 0


def test_realize_coupling_passive_decay():
    g0, gamma = 0.5, 200.0
    f = realize_coupling([np.sqrt(2 * g0), 0], gamma)
    assert f["pump_intensity_1"] == 0
    assert abs(f["pump_intensity_2"]) == pytest.approx(np.sqrt(g0 * gamma))
    assert f["mixing_angle"] == pytest.approx(np.sqrt(g0 * gamma) / 2)
    # adiabatic elimination recovers a cavity of bandwidth g0
    goo = GeneralizedOpenOscillator(np.eye(1), [[np.sqrt(2 * g0), 0]], np.zeros((2, 2)))
    ws = np.linspace(0, 1, 40)
    e1 = adiabatic_coupling_error(goo, gamma, ws)
    e2 = adiabatic_coupling_error(goo, 2 * gamma, ws)
    assert e1 < 0.05 and e1 / e2 == pytest.approx(2, rel=0.05)


def test_realize_coupling_zero_row_and_bad_gamma():
    assert realize_coupling([0, 0], 10.0) == {}
    with pytest.raises(ValueError):
        realize_coupling([1, 0], 0.0)


def test_one_mode_invariants_enforced():
    f = realize_coupling([0.3 + 0.1j, -0.2j], 50.0)
    OneModeRealization(mode_id=0, **f)
    bad = dict(f, coupling_beta=f["coupling_beta"] + 0.1)
    with pytest.raises(ValueError, match="beta"):
        OneModeRealization(mode_id=0, **bad)
    bad = dict(f, phase=f["phase"] + 0.3)
    with pytest.raises(ValueError, match="eps2"):
        OneModeRealization(mode_id=0, **bad)


def test_realize_internal_examples():
    out = realize_internal(np.zeros((2, 2)))
    assert out["detuning"] == 0 and out["internal_pump"] == 0
    out = realize_internal(np.diag([0.35, 0.35]))
    assert out["detuning"] == pytest.approx(0.7) and out["internal_pump"] == 0
    blk = np.array([[0, 1e4], [1e4, 0]], complex)
    out = realize_internal(blk, cavity_length=1.0)
    assert out["crystal"].r == pytest.approx(2e4 / C_LIGHT, rel=1e-12)
    assert out["crystal"].r == pytest.approx(6.67e-5, rel=1e-3)
    with pytest.raises(ValueError):
        realize_internal(np.array([[0, 1], [0, 0]]))


def test_realize_interaction_examples():
    plan = realize_interaction(InteractionTerm((0, 1), 0, 0.8))
    assert plan["phase"] == 0 and plan["mixing_angle"] == pytest.approx(0.4) and plan["crystal_pump"] == 0
    k = 0.6
    plan = realize_interaction(InteractionTerm((0, 1), 1j * k, 0))
    assert plan["crystal_pump"] == pytest.approx(2 * k)
    t = InteractionTerm((0, 1), 0.3 - 0.2j, 0.1 + 0.5j)
    H = interaction_hamiltonian_matrix(t)
    np.testing.assert_array_equal(H, H.conj().T)
    plan = realize_interaction(t)
    assert 2 * plan["mixing_angle"] * np.exp(-1j * plan["phase"]) == pytest.approx(t.eps2)


def test_crystal_mapping():
    Larm = 4000.0
    s0 = C_LIGHT / Larm
    p = map_crystal_params(s0, 0.24, 100e-6)
    assert f"{p['r']:.1e}" == "7.7e-05"
    assert p["r"] == pytest.approx(np.sqrt(100e-6 * 0.24 / Larm), rel=1e-12)
    assert p["r"] == pytest.approx(p["r_closed_form"], rel=1e-12)
    z = map_crystal_params(s0, 0.24, 0.0)
    assert z["gamma"] == 0 and z["r"] == 0
    g0 = 1234.5
    T = transmissivity_for_bandwidth(g0, 0.24)
    assert map_crystal_params(s0, 0.24, T)["gamma"] == pytest.approx(g0, rel=1e-14)
    with pytest.raises(ValueError):
        map_crystal_params(s0, -1, 0.1)


def test_required_squeezing_scaling():
    r = required_squeezing(100e-6, 0.24, 4000.0)
    assert r == pytest.approx(7.7e-5, rel=0.01)
    assert required_squeezing(400e-6, 0.24, 4000.0) == pytest.approx(2 * r, rel=1e-12)
    assert required_squeezing(100e-6, 0.24, 16000.0) == pytest.approx(r / 2, rel=1e-12)
    assert required_squeezing_rounded(100e-6, 0.24, 4000.0) == pytest.approx(7.7e-5)
    with pytest.raises(ValueError):
        required_squeezing(0, 0.24, 4000.0)


def test_synthesize_unstable_filter_report():
    s0, gamma = 1.0, 100.0
    pr = synthesize(unstable_goo(s0), gamma)
    assert len(pr.oscillators) == 1 and pr.interactions == () and pr.series_order == (0,)
    o = pr.oscillators[0]
    assert o.detuning == 0 and o.internal_pump == 0
    assert o.pump_intensity_1 == pytest.approx(-np.sqrt(s0 * gamma))
    table = hardware_table(pr)
    assert "series order: 0" in table and "-10+0i" in table


def test_synthesize_si_values():
    Larm = 4000.0
    s0 = C_LIGHT / Larm
    gamma = 100e-6 * C_LIGHT / (4 * 0.24)
    pr = synthesize(unstable_goo(s0), gamma, aux_cavity_length=0.24)
    aux = pr.crystal_params[0]["aux"]
    assert aux.mirror_transmissivity == pytest.approx(100e-6, rel=1e-12)
    assert aux.r == pytest.approx(required_squeezing(100e-6, 0.24, Larm), rel=1e-12)


def test_reconstruction_through_adiabatic_limit():
    # internal squeezing plus a mixed coupling row
    goo = GeneralizedOpenOscillator(
        np.eye(1), [[0.3 + 0.2j, 0.1]], np.array([[0.2, 0.05j], [-0.05j, 0.2]])
    )
    pr = synthesize(goo, 100.0)
    o = pr.oscillators[0]
    assert o.coupling_alpha == goo.K[0, 0] and o.coupling_beta == goo.K[0, 1]
    assert o.detuning == pytest.approx(0.4) and o.internal_pump == pytest.approx(0.05j)
    ws = np.linspace(0, 1, 30)
    errs = [adiabatic_coupling_error(goo, g, ws) for g in (100.0, 200.0, 400.0)]
    assert errs[0] < 0.05
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2, rel=0.05)


def test_realization_doc_round_trip():
    rng = np.random.default_rng(9)
    goo = GeneralizedOpenOscillator(*random_goo_parts(rng, 2, 1))
    pr = synthesize(goo, 50.0, cavity_length=1.0, aux_cavity_length=0.1)
    text = json.dumps(realization_to_doc(pr), sort_keys=True)
    back = realization_from_doc(json.loads(text))
    assert json.dumps(realization_to_doc(back), sort_keys=True) == text
    doc = json.loads(text)
    doc["interactions"][0]["eps1"] = [1.0]
    from qfilt.tfio import SchemaError

    with pytest.raises(SchemaError, match=r"interactions\[0\]\.eps1"):
        realization_from_doc(doc)
