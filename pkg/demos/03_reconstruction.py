"""Reconstruction: gather each scene column's codes and invert the transform.

Run: python3 demos/03_reconstruction.py
"""
import time

import numpy as np

from pushframe import (OpticsConfig, QualityReport, fwht, reconstruct, scramble, simulate,
                       sylvester, synthetic)

n, width = 128, 160
scene = synthetic("texture", n, width, channels=3, seed=5)
p = scramble(sylvester(n), seed=3)
stream = simulate(scene, p, OpticsConfig.ideal())

# "debiased" turns 0/1 mirror sums into +-1 estimates using the white column sum;
# "naive" assumes the mask already codes +-1.
for mode in ("naive", "debiased"):
    img = reconstruct(stream, p, mode=mode)
    print(f"{mode:9s}", QualityReport.compare(img, scene).psnr_mean, "dB")

# The fast path applies the Walsh-Hadamard transform instead of a matrix product.
t0 = time.perf_counter()
slow = reconstruct(stream, p, mode="debiased")
t1 = time.perf_counter()
fast = reconstruct(stream, p, mode="debiased", use_fast=True)
t2 = time.perf_counter()
print(f"matrix {1e3 * (t1 - t0):.1f} ms, transform {1e3 * (t2 - t1):.1f} ms, "
      f"max difference {np.abs(slow.data - fast.data).max():.2e}")

# fwht on its own: H @ v without forming H.
v = np.arange(8.0)
print(fwht(v), sylvester(8) @ v)
