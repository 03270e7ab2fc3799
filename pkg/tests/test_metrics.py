import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polarmosaic.metrics import (EvalReport, circular_distance, crop_border, evaluate, psnr,
                                 psnr_aolp)
from polarmosaic.pfa import bilinear_demosaic, mosaic
from polarmosaic.stokes import wrap_unit


def direct_psnr(ref, est, peak, border):
    h, w = ref.shape
    total = 0.0
    n = 0
    for y in range(border, h - border):
        for x in range(border, w - border):
            total += (float(ref[y, x]) - float(est[y, x])) ** 2
            n += 1
    return 10 * math.log10(peak * peak / (total / n))


def test_identical_is_flagged():
    a = np.random.default_rng(0).uniform(size=(8, 8))
    assert psnr(a, a) == math.inf
    assert psnr_aolp(a, a) == math.inf


def test_constant_error_closed_form():
    a = np.zeros((10, 10))
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    assert psnr(a, a + 0.1, peak=2.0) == pytest.approx(20 + 20 * math.log10(2), abs=1e-9)


def test_circular_wrap_closed_form():
    assert psnr_aolp(np.full((6, 6), 0.95), np.full((6, 6), 0.05)) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_summation_oracle():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(size=(2, 12, 9))
    for border in (0, 2, 3):
        assert psnr(a, b, 1.0, border) == pytest.approx(direct_psnr(a, b, 1.0, border), rel=1e-12)


def test_shape_mismatch_and_bad_peak():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 6)))
    with pytest.raises(ValueError):
        psnr_aolp(np.zeros((4, 4)), np.zeros((6, 4)))
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.ones((4, 4)), peak=0)
    with pytest.raises(ValueError):
        crop_border(np.zeros((4, 4)), 2)


_pair = arrays(np.float64, (2, 7, 7), elements=st.floats(0.0, 0.999))


@settings(max_examples=60, deadline=None)
@given(_pair)
def test_psnr_symmetric(p):
    assert psnr(p[0], p[1], border=1) == psnr(p[1], p[0], border=1)
    assert psnr_aolp(p[0], p[1], border=1) == psnr_aolp(p[1], p[0], border=1)


@settings(max_examples=60, deadline=None)
@given(_pair)
def test_circular_dominates_linear(p):
    assert psnr_aolp(p[0], p[1], border=0) >= psnr(p[0], p[1], border=0)


@settings(max_examples=60, deadline=None)
@given(_pair, st.floats(-3.0, 3.0))
def test_circular_psnr_rotation_invariant(p, c):
    r, e = p
    base = psnr_aolp(r, e, border=0)
    rot = psnr_aolp(wrap_unit(r + c), wrap_unit(e + c), border=0)
    if math.isinf(base):
        assert rot > 250
    else:
        assert rot == pytest.approx(base, abs=1e-6)


def test_circular_distance_bound():
    a, b = np.random.default_rng(2).uniform(size=(2, 1000))
    d = circular_distance(a, b)
    assert d.max() <= 0.5 and d.min() >= 0


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(3)
    ref = rng.uniform(size=(64, 64))
    noise = rng.standard_normal((64, 64))
    values = [psnr(ref, ref + s * noise) for s in (0.001, 0.01, 0.03, 0.1, 0.3)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_evaluate_identical_and_report():
    truth = np.random.default_rng(4).uniform(size=(4, 10, 10))
    rep = evaluate(truth, truth.copy())
    assert set(rep.identical) == {"i0", "i45", "i90", "i135", "s0", "dolp", "aolp"}
    assert rep.pixels == 36 and rep.border == 2
    d = json.loads(rep.to_json())
    assert all(v == "identical" for v in d["psnr_db"].values())
    assert d["peaks"]["s0"] == 2.0
    assert "identical" in rep.format_table()


def test_evaluate_bilinear_on_constant_scene():
    truth = np.stack([np.full((12, 12), v) for v in (0.2, 0.5, 0.7, 0.4)])
    rep = evaluate(truth, bilinear_demosaic(mosaic(truth)), border=2)
    assert {"i0", "i45", "i90", "i135"} <= set(rep.identical)


def test_evaluate_peaks():
    rng = np.random.default_rng(5)
    truth = rng.uniform(0.2, 0.8, size=(4, 16, 16))
    recon = truth + 0.01 * rng.standard_normal(truth.shape)
    rep = evaluate(truth, recon, border=0)
    assert rep.psnr["i45"] == pytest.approx(psnr(truth[1], recon[1], 1.0, 0))
    s0t, s0r = 0.5 * truth.sum(0), 0.5 * recon.sum(0)
    assert rep.psnr["s0"] == pytest.approx(direct_psnr(s0t, s0r, 2.0, 0), rel=1e-12)


def test_s0_averaging_gain_monte_carlo():
    # S0 halves a four-channel sum, so independent noise of std sigma per
    # channel leaves S0 noise of std sigma; with twice the peak the gain over
    # a single channel is 20 log10(2)
    rng = np.random.default_rng(6)
    truth = rng.uniform(0.2, 0.8, size=(4, 1000, 1000))
    recon = truth + 0.01 * rng.standard_normal(truth.shape)
    rep = evaluate(truth, recon, border=0)
    channel = np.mean([rep.psnr[k] for k in ("i0", "i45", "i90", "i135")])
    gain = rep.psnr["s0"] - channel
    assert gain == pytest.approx(20 * math.log10(2), abs=0.5)


def test_report_dict_keeps_finite_values():
    rep = EvalReport({"i0": 30.0, "i45": math.inf}, 2, 10)
    assert rep.to_dict()["psnr_db"] == {"i0": 30.0, "i45": "identical"}
