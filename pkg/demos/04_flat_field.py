"""Flat fielding: column gains are fixable from sums, 2D fields need frames.

Run: python3 demos/04_flat_field.py
"""
import numpy as np

from pushframe import (IlluminationField, OpticsConfig, correct_2d, reconstruct, scramble, simulate,
                       sylvester, synthetic, white_calibration)
from pushframe.metrics import mean_psnr

n = 64
scene = synthetic("texture", n, n, seed=11)
p = scramble(sylvester(n), seed=2)
base = OpticsConfig(read_noise=1e-3, supersample=2, seed=5)


def flatfield_psnr(cfg):
    img = reconstruct(simulate(scene, p, cfg), p, white_calibration(p, cfg), mode="flatfield")
    return mean_psnr(img.data, scene.data)


print(f"uniform light         {flatfield_psnr(base):6.2f} dB")

# A gain per pattern column scales every sum of that column: one number fixes it.
gains = 1.0 + 0.3 * np.sin(np.linspace(0, 5, n))
col = base.replace(illumination=IlluminationField.column_gains_field(gains))
print(f"column gains          {flatfield_psnr(col):6.2f} dB")

# A vignette varies along each column, so codes get unequal weights the sums
# cannot undo.
vig = base.replace(illumination=IlluminationField.vignette_field(floor=0.5))
print(f"vignette, flatfield   {flatfield_psnr(vig):6.2f} dB")

# With the detector frames kept, divide each one by the white frame first.
stream, frames = simulate(scene, p, vig, keep_frames=True)
fixed = reconstruct(correct_2d(frames, white_calibration(p, vig), vig), p, mode="2d-corrected")
print(f"vignette, correct_2d  {mean_psnr(fixed.data, scene.data):6.2f} dB")
