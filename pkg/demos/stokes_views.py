"""Stokes maps of a Malus-law stack and a textured scene, saved as PNGs.

    python demos/stokes_views.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image

from polarmosaic.stokes import aolp_to_rgb, quantize_u8, stokes_from_stack
from polarmosaic.synthetic import malus_stack, textured_scene

out = Path(sys.argv[1] if len(sys.argv) > 1 else "stokes_views")
out.mkdir(parents=True, exist_ok=True)

for theta in (0, 30, 60, 90, 120, 150):
    s = stokes_from_stack(malus_stack(theta, (4, 4)))
    print(f"polarizer {theta:3d} deg: dolp {s.dolp.mean():.6f}  aolp {180 * s.aolp.mean():7.3f} deg")

scene = textured_scene(160, 160, np.random.default_rng(3))
s = stokes_from_stack(scene)
Image.fromarray(quantize_u8(s.s0 / 2)).save(out / "s0.png")
Image.fromarray(quantize_u8(s.dolp)).save(out / "dolp.png")
Image.fromarray(aolp_to_rgb(s.aolp)).save(out / "aolp.png")
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
