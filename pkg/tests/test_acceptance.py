"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists a
PASS/FAIL line per criterion. Criteria 8 and 9 train networks and take
several minutes on one CPU core.
"""

import numpy as np
import pytest

from polarmosaic.bench import measure
from polarmosaic.cli import main
from polarmosaic.metrics import circular_distance, psnr_aolp
from polarmosaic.pfa import MosaicImage, bilinear_demosaic
from polarmosaic.ppdn import (PPDNConfig, count_macs, count_params, forward, init_weights, preset,
                              receptive_radius, tiled_forward, zero_weights)
from polarmosaic.stokes import stokes_from_stack, wrap_unit
from polarmosaic.synthetic import malus_stack
from polarmosaic.train import mae_aolp
from polarmosaic.weightfile import save_weights
from support import bilinear_scores, desk_scenes, desk_train, gradient_check


def detail(request, text):
    request.node.user_properties.append(("detail", text))


@pytest.mark.criterion(1)
def test_parameter_counts(request):
    small, large = count_params(preset("ppdn")), count_params(preset("ppdn-l"))
    detail(request, f"PPDN {small} vs 22.4K ({abs(small - 22400) / 22400:.2%}), PPDN-L {large}")
    assert large == 450_760
    assert small == 22_312
    assert abs(small - 22_400) / 22_400 < 0.01


@pytest.mark.criterion(2)
def test_mac_counts(request):
    g_small = count_macs(preset("ppdn"), 2048, 2448) / 1e9
    g_large = count_macs(preset("ppdn-l"), 2048, 2448) / 1e9
    detail(request, f"{g_small:.1f} vs 112, {g_large:.0f} vs 2260 GMACs")
    assert round(g_small, 1) == 111.2
    assert round(g_large) == 2255
    assert abs(g_small - 112) / 112 < 0.01
    assert abs(g_large - 2260) / 2260 < 0.005


@pytest.mark.criterion(3)
def test_gradient_oracle(request):
    worst, count = gradient_check(PPDNConfig(m=1, n=1, k=4), size=8)
    detail(request, f"max relative error {worst:.2e} over {count} parameters")
    assert count == 780
    assert worst < 1e-4


@pytest.mark.criterion(4)
def test_zero_residual_consistency(request):
    cfg = preset("ppdn")
    w = zero_weights(cfg)
    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(100):
        h, w_ = 2 * rng.integers(2, 20, size=2)
        m = MosaicImage(rng.uniform(size=(h, w_)))
        res = forward(m, w, cfg)
        bil = bilinear_demosaic(m)
        mismatches += not (np.array_equal(res.x_rr, bil) and np.array_equal(res.x_cr, bil))
    detail(request, f"{mismatches}/100 mosaics differ")
    assert mismatches == 0


@pytest.mark.criterion(5)
def test_tiling_equivalence(request):
    cfg = preset("ppdn")
    assert receptive_radius(cfg) == 6
    rng = np.random.default_rng(1)
    checked = 0
    for dtype in (np.float64, np.float32):
        for seed in range(3):
            w = init_weights(cfg, np.random.default_rng(seed), output_scale=1.0)
            m = MosaicImage(rng.uniform(size=(128, 128)))
            a = forward(m, w, cfg, dtype=dtype)
            b = tiled_forward(m, w, cfg, tiles=(2, 2), halo=8, dtype=dtype)
            assert np.array_equal(a.x_rr, b.x_rr) and np.array_equal(a.x_cr, b.x_cr)
            checked += 1
    detail(request, f"{checked} random 128x128 inputs bitwise equal")


@pytest.mark.criterion(6)
def test_circular_loss_suite(request):
    rng = np.random.default_rng(2)
    r, e = rng.uniform(size=(2, 1_000_000))
    d = circular_distance(r, e)
    assert d.max() <= 0.5 and d.min() >= 0
    assert np.array_equal(d, circular_distance(e, r))
    assert 0 <= mae_aolp(r, e) <= 0.5 and mae_aolp(r, e) == mae_aolp(e, r)
    base = psnr_aolp(r.reshape(1000, 1000), e.reshape(1000, 1000), border=0)
    shifts = rng.uniform(-2, 2, size=5)
    worst = 0.0
    for c in shifts:
        rot = psnr_aolp(wrap_unit(r + c).reshape(1000, 1000), wrap_unit(e + c).reshape(1000, 1000), border=0)
        worst = max(worst, abs(rot - base))
    detail(request, f"bound {d.max():.6f}, rotation drift {worst:.2e} dB")
    assert worst < 1e-6


@pytest.mark.criterion(7)
def test_stokes_physics(request):
    worst_dolp = worst_aolp = 0.0
    for theta in range(0, 180, 15):
        s = stokes_from_stack(malus_stack(float(theta), (16, 16)))
        worst_dolp = max(worst_dolp, np.abs(s.dolp - 1).max())
        worst_aolp = max(worst_aolp, np.abs(s.aolp - theta / 180).max())
    detail(request, f"dolp err {worst_dolp:.1e}, aolp err {worst_aolp:.1e}")
    assert worst_dolp <= 1e-6
    assert worst_aolp <= 1e-6


# desk-scale training: the scenes and the full-model run are shared


@pytest.fixture(scope="module")
def desk():
    train, test = desk_scenes()
    return train, test, bilinear_scores(test)


@pytest.fixture(scope="module")
def full_model(desk):
    train, test, _ = desk
    return desk_train(train, test, preset("ppdn"))[0]


def fmt(scores):
    return "/".join(f"{scores[k]:.2f}" for k in ("s0", "dolp", "aolp"))


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_training_beats_bilinear(request, desk, full_model):
    bil = desk[2]
    detail(request, f"S0/DoLP/AoLP dB: PPDN {fmt(full_model)} vs bilinear {fmt(bil)}")
    for key in ("s0", "dolp", "aolp"):
        assert full_model[key] > bil[key], key


@pytest.mark.slow
@pytest.mark.criterion(9)
def test_ablation_direction(request, desk, full_model):
    train, test, _ = desk
    coarse = desk_train(train, test, PPDNConfig(1, 1, 32, refine=False))[0]
    plain = desk_train(train, test, preset("ppdn"), aolp_loss="mae")[0]
    detail(request, f"full {fmt(full_model)}, coarse-only {fmt(coarse)}, plain-MAE AoLP {fmt(plain)}")
    assert coarse["dolp"] < full_model["dolp"]
    assert coarse["aolp"] < full_model["aolp"]
    assert plain["aolp"] <= full_model["aolp"]


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.criterion(10)
def test_cli_determinism(request, tmp_path):
    cfg = preset("ppdn")
    weights = tmp_path / "w.ppdn"
    save_weights(init_weights(cfg, np.random.default_rng(5), output_scale=1.0), cfg, weights)
    for rep in ("a", "b"):
        d = tmp_path / rep
        steps = [
            ["synth", d / "ds", "--scenes", "2", "--test", "1", "--size", "32x32", "--seed", "11"],
            ["mosaic", d / "ds" / "scene002", d / "m.pfm"],
            ["demosaic", d / "m.pfm", d / "bil"],
            ["demosaic", d / "m.pfm", d / "net", "--method", "ppdn", "--weights", weights],
            ["demosaic", d / "m.pfm", d / "tiled", "--method", "ppdn", "--weights", weights,
             "--tile", "2x2", "--halo", "8", "--float32"],
            ["stokes", d / "net", d / "st"],
            ["render", d / "st", d / "png"],
            ["eval", d / "ds" / "scene002", d / "net", "--json", d / "eval.json"],
            ["train", d / "ds" / "manifest.json", d / "w.ppdn", "--iters", "6", "--batch", "2",
             "--patch", "16", "--seed", "3", "--log-every", "2", "--log", d / "log.jsonl",
             "--checkpoint-dir", d / "ck", "--checkpoint-every", "3", "--deterministic", "--quiet"],
        ]
        for argv in steps:
            assert main([str(a) for a in argv]) == 0, argv
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert sorted(a) == sorted(b)
    # only the mosaic sidecar records its (different) source directory
    differing = sorted(k for k in a if a[k] != b[k])
    detail(request, f"{len(a)} artifacts compared, differing: {differing}")
    assert differing == ["m.pfm.json"]
    assert a["m.pfm.json"].replace(b"/a/", b"/b/") == b["m.pfm.json"]


@pytest.mark.slow
@pytest.mark.criterion(11)
def test_benchmark_sanity(request):
    small_cfg, large_cfg = preset("ppdn"), preset("ppdn-l")
    small_w = init_weights(small_cfg, np.random.default_rng(0), output_scale=1.0)
    large_w = init_weights(large_cfg, np.random.default_rng(0), output_scale=1.0)
    small = measure("ppdn", small_w, (512, 512), warmup=1, iters=10)
    large = measure("ppdn-l", large_w, (512, 512), warmup=1, iters=10)
    half = measure("ppdn", small_w, (256, 512), warmup=1, iters=10)
    ratio = small.mean_ms / half.mean_ms
    detail(request, f"FPS {small.fps:.2f} vs {large.fps:.2f}; 2x pixels -> {ratio:.2f}x latency")
    assert small.fps > large.fps
    assert 2 * 0.7 <= ratio <= 2 * 1.3
