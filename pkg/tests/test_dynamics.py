from __future__ import annotations

import numpy as np
import pytest

from qfilt.dynamics import (
    C_LIGHT,
    TwoModeModel,
    adiabatic_transfer,
    dc_noise_ratio,
    dpa_adiabatic_io,
    dpa_exact_io,
    dpa_matched,
    dpa_relative_error,
    loss_from_rate,
    loss_rate_for_target,
    loss_requirement_curve,
    lossy_transfer,
    noise_ratio_b_over_a,
    rate_from_loss,
    two_mode_transfer,
)
from qfilt.statespace import SingularityError

from oracles import two_mode_bruteforce, unstable_filter_two_mode_dc


def test_model_validation():
    with pytest.raises(ValueError):
        TwoModeModel(1.0, 0.0)
    with pytest.raises(ValueError):
        TwoModeModel(1.0, 10.0, gamma_a_eps=-1)


def test_two_mode_dc_is_minus_one():
    assert two_mode_transfer(TwoModeModel(1.0, 100.0), 0.0) == pytest.approx(
        unstable_filter_two_mode_dc(1.0, 100.0), abs=1e-14
    )


def test_two_mode_near_target_at_s0():
    got = two_mode_transfer(TwoModeModel(1.0, 100.0), 1.0)
    target = adiabatic_transfer(1.0, 1.0)
    assert target == pytest.approx(1j)
    assert abs(got - target) < 0.02


def test_two_mode_matches_bruteforce_hamiltonian_build():
    for (s0, g, ga, gb) in [(1.0, 100.0, 0, 0), (2.0, 30.0, 1e-2, 3e-3), (0.5, 10.0, 0.1, 0.2)]:
        m = TwoModeModel(s0, g, ga, gb)
        for w in (0.0, 0.3, 2.0):
            ref = two_mode_bruteforce(s0, g, ga, gb, w)
            r = lossy_transfer(m, w)
            assert r.signal == pytest.approx(ref[0], abs=1e-12)
            assert r.noise_a == pytest.approx(ref[3], abs=1e-12)
            assert r.noise_b == pytest.approx(ref[4], abs=1e-12)


def test_no_pump_bare_cavity_is_unitary():
    m = TwoModeModel(0.0, 100.0)
    for w in (0.0, 3.0, 250.0):
        assert abs(two_mode_transfer(m, w)) == pytest.approx(1, abs=1e-12)


def test_lossless_unitarity():
    m = TwoModeModel(1.0, 100.0)
    for w in np.linspace(-5, 5, 41):
        assert abs(abs(two_mode_transfer(m, w)) - 1) < 1e-10


def test_adiabatic_convergence_first_order():
    ws = np.linspace(0, 1, 201)
    err = lambda g: max(abs(two_mode_transfer(TwoModeModel(1, g), w) - adiabatic_transfer(1, w)) for w in ws)  # noqa: E731
    e = [err(g) for g in (100.0, 200.0, 400.0)]
    assert e[0] < 0.05
    assert e[0] / e[1] == pytest.approx(2, rel=0.05)
    assert e[1] / e[2] == pytest.approx(2, rel=0.05)
    # fitted constant C in err <= C s0 / gamma
    assert e[0] * 100 == pytest.approx(1.0, rel=0.05)


def test_lossy_zero_loss_equals_lossless():
    m = TwoModeModel(1.0, 100.0)
    for w in (0.0, 0.4, 1.3):
        r = lossy_transfer(m, w)
        assert r.signal == two_mode_transfer(m, w)
        assert r.noise_a == 0 and r.noise_b == 0
        assert r.closed_signal == pytest.approx(adiabatic_transfer(1.0, w))
        assert r.closed_noise_a == 0


def test_lossy_dc_noise_first_order():
    s0 = 1.0
    for ga in (1e-4, 1e-3):
        r = lossy_transfer(TwoModeModel(s0, 1e4, ga, 0.0), 0.0)
        assert abs(r.closed_noise_a) ** 2 == pytest.approx(4 * ga / s0, rel=3 * ga / s0)
        assert abs(r.noise_a) ** 2 == pytest.approx(4 * ga / s0, rel=5e-3)


def test_lossy_orders_in_operating_regime():
    s0, ga = 1.0, 0.01
    r = lossy_transfer(TwoModeModel(s0, 100.0 * s0, ga, ga), 0.0)
    distortion = abs(r.signal - adiabatic_transfer(s0, 0.0))
    assert 0.3 * ga / s0 < distortion < 3 * ga / s0 + 0.02
    assert 0.3 * np.sqrt(ga / s0) < abs(r.noise_a) < 3 * np.sqrt(ga / s0)


def test_noise_ratio_examples():
    m = TwoModeModel(1.0, 100.0, 1e-3, 1e-3)
    assert noise_ratio_b_over_a(m, 0.0)["formula"] == 0
    assert noise_ratio_b_over_a(m, 0.1)["formula"] == pytest.approx(1e-4)
    for w in np.linspace(0.01, 0.3, 30):
        r = noise_ratio_b_over_a(m, w)
        assert 0.5 < r["full"] / r["formula"] < 2
        assert r["full"] < 1
    # at DC the formula vanishes and the full solve is negligible
    assert noise_ratio_b_over_a(m, 0.0)["full"] < 1e-6
    with pytest.raises(ZeroDivisionError):
        noise_ratio_b_over_a(TwoModeModel(1.0, 100.0), 0.1)


def test_dpa_examples():
    assert dpa_exact_io(0.9, 0.0, 1.0, 0.0) == pytest.approx(1.0)
    s0, gamma = 1.0, 16.0  # gamma = 4 sqrt(s0 gamma)
    v = dpa_adiabatic_io(gamma, s0, 0.0)
    assert v == pytest.approx((gamma + 4) / (gamma - 4)) and v.real > 1
    with pytest.raises(SingularityError):
        dpa_adiabatic_io(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        dpa_exact_io(1.5, 0.0, 1.0, 0.0)


def test_dpa_matched_parameters():
    p = dpa_matched(1e-4, 0.24, C_LIGHT / 4000)
    assert p["r"] == pytest.approx(np.sqrt(1e-4 * 0.24 / 4000), rel=1e-12)


def test_dpa_gain_rate_two_converges_linearly():
    # with the amplitude-quadrature gain rate 2 sqrt(s0 gamma) the propagation model
    # approaches the single-mode form linearly in the small parameters
    errs = []
    for k in (1.0, 0.5, 0.25):
        T, s0 = 1e-4 * k, C_LIGHT / 4000 * k
        g = dpa_matched(T, 0.24, s0)["gamma"]
        errs.append(dpa_relative_error(T, 0.24, s0, [0.05 * g], gain_factor=2.0))
    assert errs[0] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2, rel=0.05)


def test_dpa_printed_form_gap():
    # the printed single-mode form differs at O(1) from the propagation model
    s0 = C_LIGHT / 4000
    g = dpa_matched(1e-4, 0.24, s0)["gamma"]
    err = dpa_relative_error(1e-4, 0.24, s0, np.linspace(0, 0.1 * g, 11))
    assert err > 0.1


def test_loss_conversions():
    assert loss_from_rate(rate_from_loss(1e-5, 2.0), 2.0) == pytest.approx(1e-5, rel=1e-14)


def test_dc_noise_ratio_conventions():
    x = 0.01
    assert dc_noise_ratio(x, "power") == pytest.approx(4 * x / (1 + x) ** 2)
    assert dc_noise_ratio(x, "amplitude") ** 2 == pytest.approx(dc_noise_ratio(x, "power"))
    with pytest.raises(ValueError):
        dc_noise_ratio(x, "decibel")
    with pytest.raises(ValueError):
        loss_rate_for_target(1.0, 1.5)


def test_loss_rate_matches_full_solve_root():
    # first-principles oracle: root-solve the full four-operator model at w = 0
    from scipy.optimize import brentq

    s0 = 1.0
    def ratio(ga):
        r = lossy_transfer(TwoModeModel(s0, 1e6, ga, 0.0), 0.0)
        return abs(r.noise_a) ** 2 / abs(r.signal) ** 2

    ga_full = brentq(lambda g: ratio(g) - 0.1, 1e-9, 0.9)
    assert loss_rate_for_target(s0, 0.1, "power") == pytest.approx(ga_full, rel=1e-4)
    ga_full_amp = brentq(lambda g: np.sqrt(ratio(g)) - 0.1, 1e-9, 0.9)
    assert loss_rate_for_target(s0, 0.1, "amplitude") == pytest.approx(ga_full_amp, rel=1e-4)


def test_loss_curve_linear_and_conventions():
    curve = loss_requirement_curve(4000.0, 0.1, [0.5, 1.0, 2.0, 8.0])
    per = [r["eps_per_length"] for r in curve["rows"]]
    assert max(per) - min(per) < 1e-18
    eps = [r["eps_a"] for r in curve["rows"]]
    assert all(b > a for a, b in zip(eps, eps[1:]))
    assert curve["convention"] == "amplitude"
    assert curve["eps_per_length"] * 1e6 == pytest.approx(2.5, rel=0.02)
    assert curve["eps_per_length_other_convention"] * 1e6 == pytest.approx(26.3, rel=0.01)
    power = loss_requirement_curve(4000.0, 0.1, [1.0], convention="power")
    assert power["eps_per_length"] == pytest.approx(curve["eps_per_length_other_convention"])
    # the power convention at 1/100 gives the amplitude result at 1/10
    p100 = loss_requirement_curve(4000.0, 0.01, [1.0], convention="power")
    assert p100["eps_per_length"] == pytest.approx(curve["eps_per_length"], rel=1e-12)
