import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimo_hcrb.bounds import (
    ALL_VARIANTS,
    DEFAULT_VARIANT,
    ClosedFormVariant,
    compare_paths,
    crb_no_mismatch,
    hcrb_closed_form,
    hcrb_oracle,
    layout_matrices,
    lambdas,
    mu_coefficients,
    r_delta_inverse,
)
from mimo_hcrb.errors import DegenerateSigma, PoleHit, SingularGeometry
from mimo_hcrb.fim import build_blocks
from mimo_hcrb.numerics import psd_order_leq, rel_frobenius, sym_eigvalsh
from mimo_hcrb.scenario import Scenario, SignalModel, circular_layout, random_scenario
from oracles import hp_position_bound

SIGMA_LADDER = (1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2)


def rot(theta):
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def test_crb0_halves_when_snr_doubles(rng):
    s = random_scenario(rng)
    a = crb_no_mismatch(s)
    b = crb_no_mismatch(s.with_snr(2 * s.signal.snr))
    np.testing.assert_allclose(b, a / 2, rtol=1e-10, atol=1e-10 * np.abs(a).max())


def test_collinear_geometry_is_singular(ghz_signal):
    s = Scenario([[1e3, 0], [-2e3, 0]], [[5e3, 0], [-4e3, 0]], [0, 0], ghz_signal, 1e-3)
    with pytest.raises(SingularGeometry):
        crb_no_mismatch(s)
    with pytest.raises(SingularGeometry):
        hcrb_oracle(s)


def test_symmetric_layout_gives_isotropic_crb0(ghz_signal):
    s = circular_layout(4, 4, 5e3, ghz_signal, rx_offset=math.pi / 4)
    c = crb_no_mismatch(s)
    assert abs(c[0, 1]) < 1e-10 * c[0, 0]
    assert c[0, 0] == pytest.approx(c[1, 1], rel=1e-10)


def test_zero_sigma_equals_crb0(rng):
    s = random_scenario(rng)
    assert rel_frobenius(hcrb_oracle(s.with_sigma(0.0)), crb_no_mismatch(s)) <= 1e-10


def test_tiny_sigma_continuity(rng):
    s = random_scenario(rng)
    assert rel_frobenius(hcrb_oracle(s.with_sigma(1e-12)), crb_no_mismatch(s)) <= 1e-6


@pytest.mark.parametrize("snr_db", [-10.0, 0.0, 10.0, 20.0, 30.0])
def test_circle_geometry_trace_increases_with_sigma(circle_scenario, snr_db):
    s = circle_scenario.with_snr(10 ** (snr_db / 10))
    traces = [np.trace(hcrb_oracle(s.with_sigma(x))) for x in SIGMA_LADDER]
    assert all(b > a for a, b in zip(traces, traces[1:]))


@pytest.mark.parametrize("seed,sigma", [(1, 1e-3), (2, 5e-2), (3, 1.0)])
def test_oracle_against_extended_precision(seed, sigma):
    s = random_scenario(np.random.default_rng(seed), sigma_delta_sq=sigma)
    b = build_blocks(s)
    ref = hp_position_bound(b.d, b.r_tau, b.g, b.h)
    assert rel_frobenius(hcrb_oracle(s), ref) < 1e-8


def test_oracle_extended_precision_near_saturation(ghz_signal):
    s = circular_layout(11, 9, 10e3, dataclasses.replace(ghz_signal, snr=1e6), 100.0)
    b = build_blocks(s)
    ref = hp_position_bound(b.d, b.r_tau, b.g, b.h)
    assert rel_frobenius(hcrb_oracle(s), ref) < 1e-8


def test_lambda_example():
    tx = [[math.cos(k), math.sin(k)] for k in range(11)]
    rx = [[2 * math.cos(k), 2 * math.sin(k)] for k in range(9)]
    s = Scenario(tx, rx, [0, 0], SignalModel(1e9, 1e6, 10.0), 0.01)
    l1, l2 = lambdas(s)
    assert l1 == pytest.approx(1 / 14)
    assert l2 == pytest.approx(1 / 16)


def test_r_delta_inverse_structure(circle_scenario):
    r = r_delta_inverse(circle_scenario)
    m = circle_scenario.n_tx
    assert r.interpretation_tag == "printed"
    assert not r.value[:m, m:].any() and not r.value[m:, :m].any()
    np.testing.assert_array_equal(r.value, r.value.T)


def test_r_delta_inverse_vanishes_with_sigma(circle_scenario):
    r = r_delta_inverse(circle_scenario.with_sigma(1e-14))
    assert np.abs(r.value).max() < 1e-12


def test_r_delta_inverse_schur_reading_is_exact_inverse(circle_scenario):
    # the "schur" reading inverts the phase block of H after eliminating
    # the reflectivity
    b = build_blocks(circle_scenario)
    s_block = b.a_delta - b.f_theta_delta.T @ np.linalg.solve(b.sigma_theta, b.f_theta_delta)
    r = r_delta_inverse(circle_scenario, "schur").value
    np.testing.assert_allclose(r @ s_block, np.eye(20), atol=1e-9)


def test_r_delta_pole(circle_scenario):
    s = circle_scenario.with_snr(1e6).with_sigma(1e6)
    with pytest.raises(PoleHit):
        r_delta_inverse(s)


def test_r_delta_needs_positive_sigma(circle_scenario):
    with pytest.raises(DegenerateSigma):
        r_delta_inverse(circle_scenario.with_sigma(0.0))


def test_mu0_value():
    s = Scenario([[1e3, 0]], [[0, 1e3]], [0, 0], SignalModel(1e9, 1e6, 1.0), 1e-3)
    mu0 = mu_coefficients(s)[0]
    assert mu0 == pytest.approx(8 * math.pi ** 2 * (1e18 + 1e12) / 299792458.0 ** 2, rel=1e-14)
    assert mu0 == pytest.approx(878.5, rel=1e-4)


def test_layout_matrices_rank_one_psd(rng):
    s = random_scenario(rng, sigma_delta_sq=1e-3)
    for bm in layout_matrices(s):
        ev = sym_eigvalsh(bm)
        assert ev[0] >= -1e-12 * ev[1]
        assert abs(ev[0]) <= 1e-12 * max(ev[1], 1e-300)


@pytest.mark.parametrize("variant", ALL_VARIANTS, ids=lambda v: v.tag)
def test_closed_form_sum_decomposition(circle_scenario, variant):
    r = hcrb_closed_form(circle_scenario, variant)
    np.testing.assert_array_equal(r.hcrb, r.crb0 + r.delta_crb)


def test_default_closed_form_matches_oracle(rng):
    for _ in range(10):
        s = random_scenario(rng, sigma_delta_sq=(1e-5, 1e-1))
        r = hcrb_closed_form(s)
        assert r.variant == DEFAULT_VARIANT.tag
        assert rel_frobenius(r.hcrb, hcrb_oracle(s)) < 1e-8


def test_variant_tags_round_trip():
    for v in ALL_VARIANTS:
        assert ClosedFormVariant.from_tag(v.tag) == v
    with pytest.raises(ValueError):
        ClosedFormVariant.from_tag("pdelta/unknown/corrected")


def test_compare_paths_tiny_sigma(rng):
    s = random_scenario(rng, sigma_delta_sq=1e-12)
    res = compare_paths(s)
    assert rel_frobenius(res.hcrb_oracle, res.crb0) < 1e-6
    for v in res.variants:
        if v.hcrb is not None:
            assert rel_frobenius(v.hcrb, res.crb0) < 1e-6, v.tag


def test_compare_paths_random_twenty_sensors():
    rng = np.random.default_rng(99)
    s = random_scenario(rng, m_range=(10, 10), n_range=(10, 10), sigma_delta_sq=1e-2)
    res = compare_paths(s)
    assert {v.tag for v in res.variants} == {v.tag for v in ALL_VARIANTS}
    for v in res.variants:
        assert v.status == "error" or v.deviation >= 0
    assert res.deviation is not None and res.deviation < 1e-6
    # every as-printed reading disagrees with the reference path
    assert all(v.status != "ok" for v in res.variants if v.tag != DEFAULT_VARIANT.tag)
    np.testing.assert_allclose(res.delta_crb, res.hcrb_oracle - res.crb0)


def test_compare_paths_rejects_zero_sigma(circle_scenario):
    with pytest.raises(DegenerateSigma):
        compare_paths(circle_scenario.with_sigma(0.0))


@given(st.integers(0, 2**31), st.floats(1e-5, 1.0))
def test_loewner_order_over_crb0(seed, sigma):
    s = random_scenario(np.random.default_rng(seed), sigma_delta_sq=sigma)
    assert psd_order_leq(crb_no_mismatch(s), hcrb_oracle(s))


@given(st.integers(0, 2**31), st.floats(1e-5, 1e-1), st.floats(1.01, 10.0))
def test_monotone_in_sigma(seed, sigma, factor):
    s = random_scenario(np.random.default_rng(seed), sigma_delta_sq=sigma)
    assert psd_order_leq(hcrb_oracle(s), hcrb_oracle(s.with_sigma(sigma * factor)))


@given(st.integers(0, 2**31), st.floats(-math.pi, math.pi))
def test_rotation_equivariance(seed, theta):
    s = random_scenario(np.random.default_rng(seed), sigma_delta_sq=(1e-4, 1e-1))
    r = rot(theta)
    t = s.transformed(rotation=r)
    for f in (crb_no_mismatch, hcrb_oracle, lambda x: hcrb_closed_form(x).hcrb):
        assert rel_frobenius(f(t), r @ f(s) @ r.T) < 1e-9


def test_scale_consistency_at_zero_bandwidth(rng):
    base = random_scenario(rng, bandwidth_hz=0.0)
    c1 = crb_no_mismatch(base)
    faster = dataclasses.replace(base, signal=dataclasses.replace(base.signal, carrier_hz=3e9))
    np.testing.assert_allclose(crb_no_mismatch(faster), c1 / 9, rtol=1e-9, atol=1e-9 * c1.max())
    slower_c = dataclasses.replace(
        base, signal=dataclasses.replace(base.signal, speed_of_light=base.signal.speed_of_light / 2)
    )
    np.testing.assert_allclose(crb_no_mismatch(slower_c), c1 / 4, rtol=1e-9,
                               atol=1e-9 * c1.max())


def test_large_error_saturation(ghz_signal):
    # the residual carrier information decays like 1/(snr sigma^2), so the
    # 1 % plateau is reached at high snr only
    s = circular_layout(11, 9, 10e3, dataclasses.replace(ghz_signal, snr=1e6))
    t10 = np.trace(hcrb_oracle(s.with_sigma(10.0)))
    t100 = np.trace(hcrb_oracle(s.with_sigma(100.0)))
    assert abs(t100 - t10) / t100 < 0.01
    # limit: only the bandwidth part of the delay information survives
    b = build_blocks(s)
    j_bw = 8 * math.pi ** 2 * ghz_signal.bandwidth_hz ** 2 * 1e6 * b.d @ b.d.T
    limit = np.trace(np.linalg.inv(j_bw))
    assert t10 < t100 < limit * (1 + 1e-6)
    assert abs(t100 - limit) / limit < 0.01
