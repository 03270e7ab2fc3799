"""PSNR for intensity and Stokes maps, and circular PSNR for AoLP.

Peaks: 1 for the four intensity channels and DoLP, 2 for S0 (the sum of four
[0, 1] channels halved), and 1 for AoLP measured with the circular distance
``min(|d|, 1 - |d|)``. A zero MSE is reported as ``math.inf`` ("identical").
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .stokes import EVAL_EPS, stokes_from_stack

ROWS = ("i0", "i45", "i90", "i135", "s0", "dolp", "aolp")
PEAKS = {"i0": 1.0, "i45": 1.0, "i90": 1.0, "i135": 1.0, "s0": 2.0, "dolp": 1.0, "aolp": 1.0}
DEFAULT_BORDER = 2


def crop_border(a, border):
    a = np.asarray(a)
    if border == 0:
        return a
    h, w = a.shape[-2:]
    if 2 * border >= h or 2 * border >= w:
        raise ValueError(f"border {border} leaves no pixels of a {h}x{w} image")
    return a[..., border:h - border, border:w - border]


def _check_shapes(ref, est):
    if np.shape(ref) != np.shape(est):
        raise ValueError(f"shape mismatch: {np.shape(ref)} vs {np.shape(est)}")


def _psnr_from_mse(mse, peak):
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr(ref, est, peak=1.0, border=DEFAULT_BORDER):
    if not peak > 0:
        raise ValueError("peak must be positive")
    _check_shapes(ref, est)
    d = crop_border(np.asarray(ref, dtype=np.float64) - np.asarray(est, dtype=np.float64), border)
    return _psnr_from_mse(float(np.mean(d * d)), peak)


def circular_distance(ref, est):
    d = np.abs(np.asarray(ref, dtype=np.float64) - np.asarray(est, dtype=np.float64))
    return np.minimum(d, 1.0 - d)


def psnr_aolp(ref, est, border=DEFAULT_BORDER):
    """PSNR of normalized angles using the wrap-around distance."""
    _check_shapes(ref, est)
    d = crop_border(circular_distance(ref, est), border)
    return _psnr_from_mse(float(np.mean(d * d)), 1.0)


def is_identical(value):
    return value == math.inf


@dataclass
class EvalReport:
    psnr: dict
    border: int
    pixels: int
    peaks: dict = field(default_factory=lambda: dict(PEAKS))

    @property
    def identical(self):
        return [k for k in ROWS if is_identical(self.psnr[k])]

    def to_dict(self):
        rows = {k: ("identical" if is_identical(v) else v) for k, v in self.psnr.items()}
        return {"psnr_db": rows, "border": self.border, "pixels": self.pixels,
                "peaks": self.peaks, "aolp_distance": "circular"}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def format_table(self):
        labels = {"i0": "I0", "i45": "I45", "i90": "I90", "i135": "I135",
                  "s0": "S0", "dolp": "DoLP", "aolp": "AoLP"}
        lines = [f"{'':6s}{'PSNR (dB)':>12s}"]
        for k in ROWS:
            v = self.psnr[k]
            cell = "identical" if is_identical(v) else f"{v:.2f}"
            lines.append(f"{labels[k]:6s}{cell:>12s}")
        lines.append(f"border {self.border} px, {self.pixels} px evaluated")
        return "\n".join(lines)


def evaluate(truth, recon, border=DEFAULT_BORDER):
    """All seven PSNR rows for a reconstructed ``(4, H, W)`` stack."""
    truth = np.asarray(truth, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    _check_shapes(truth, recon)
    st = stokes_from_stack(truth, EVAL_EPS)
    sr = stokes_from_stack(recon, EVAL_EPS)
    values = {}
    for c, key in enumerate(ROWS[:4]):
        values[key] = psnr(truth[..., c, :, :], recon[..., c, :, :], PEAKS[key], border)
    values["s0"] = psnr(st.s0, sr.s0, PEAKS["s0"], border)
    values["dolp"] = psnr(st.dolp, sr.dolp, PEAKS["dolp"], border)
    values["aolp"] = psnr_aolp(st.aolp, sr.aolp, border)
    pixels = int(np.prod(crop_border(st.s0, border).shape))
    return EvalReport(values, border, pixels)
