"""Noise averaging of multiplexed sums, and the quality metrics.

Run: python3 demos/06_noise_and_metrics.py
"""
import numpy as np

from pushframe import (OpticsConfig, PatternSpec, QualityReport, line_artifact_score, reconstruct,
                       scramble, simulate, sylvester, synthetic)

n, width, sigma = 64, 8, 0.05
scene = synthetic("texture", n, width, seed=3)
p = scramble(sylvester(n), seed=4)


def recon(seed, noise):
    cfg = OpticsConfig(readout="differential", read_noise=noise, supersample=1, seed=seed)
    return reconstruct(simulate(scene, p, cfg), p, mode="naive").data


# Each pixel is a +-1 combination of n sums divided by n, so read noise of
# sigma per sum becomes sigma / sqrt(n) per pixel.
clean = recon(0, 0.0)
errs = np.stack([recon(k, sigma) - clean for k in range(300)])
print(f"per-pixel noise {errs.std(axis=0).mean():.5f}, sigma/sqrt(n) {sigma / np.sqrt(n):.5f}")

# Metrics: PSNR, SSIM and the line-artifact score (column-mean roughness).
noisy = clean + errs[0]
print(QualityReport.compare(noisy, scene, label="noisy"))

# A stripe added to one column shows up in the line score.
striped = scene.data.copy()
striped[:, 3] *= 1.2
print("line score clean vs striped:", line_artifact_score(scene.data)[0],
      line_artifact_score(striped)[0])
print("identity pattern is a valid PatternSpec:", PatternSpec.natural(n).is_identity,
      "scrambled:", scramble(sylvester(n), 4).is_identity)
