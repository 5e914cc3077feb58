"""Motion errors: step-size miscalibration, jitter and shear.

Run: python3 demos/05_motion_errors.py
"""
from pushframe import OpticsConfig, reconstruct, scramble, shear_correct, simulate, sylvester, synthetic
from pushframe.metrics import mean_psnr

n = 128
scene = synthetic("texture", n, n, seed=7, smooth=1.5)
p = scramble(sylvester(n), seed=1)


def run(**kw):
    cfg = OpticsConfig(supersample=1, read_noise=1e-3, **kw)
    return reconstruct(simulate(scene, p, cfg), p, use_fast=True)


# A step that is off by a fraction of a pixel accumulates over the n steps.
for delta in (0.0, 0.2 / n, 1.0 / n, 4.0 / n):
    print(f"step error {delta:.5f}: {mean_psnr(run(step_error=delta).data, scene.data):6.2f} dB")

# Random per-step jitter (pixels).
for jitter in (0.01, 0.05):
    print(f"jitter {jitter}: {mean_psnr(run(step_jitter=jitter).data, scene.data):6.2f} dB")

# Shear: the scene drifts vertically as it moves. Reconstruction sees a
# sheared scene, and shear_correct shifts the columns back.
sheared = run(shear_rows_per_column=0.1)
print(f"shear 0.1, raw        {mean_psnr(sheared.data, scene.data):6.2f} dB")
undone = shear_correct(sheared, 0.1)
m = 14  # rows pushed past the edge are lost
print(f"shear 0.1, corrected  {mean_psnr(undone.data[m:-m], scene.data[m:-m]):6.2f} dB (interior rows)")
