"""Forward model: a scene slides across the mask, one column sum per step.

Run: python3 demos/02_forward_model.py
"""
import numpy as np

from pushframe import (IlluminationField, OpticsConfig, integrate_columns, render_frame, scramble,
                       simulate, sylvester, synthetic)

n, width = 32, 48
scene = synthetic("texture", n, width, seed=4)
p = scramble(sylvester(n), seed=2)

# Ideal optics: every mirror is fully on or off, no blur and no noise.
ideal = OpticsConfig.ideal()
stream = simulate(scene, p, ideal)
print("stream shape (steps, n, channels):", stream.data.shape, "= W + n - 1 steps")

# The same numbers from an explicit detector frame at one step.
t = 20
frame = render_frame(scene, p, ideal, t)
print("frame route matches stream:",
      np.allclose(integrate_columns(frame, ideal.supersample), stream.data[t]))

# Realistic optics: imperfect off-state, blur, a vignetted light source, noise.
real = OpticsConfig(contrast_floor=0.02, blur_sigma=0.4, supersample=2, read_noise=1e-3,
                    shot_noise=True, illumination=IlluminationField.vignette_field(floor=0.6),
                    seed=9)
noisy = simulate(scene, p, real)
print("mean |difference| from ideal:", float(np.abs(noisy.data - stream.data).mean()))

# Worker count never changes the result: noise is keyed by (seed, step, channel).
print("workers 1 vs 4 identical:",
      np.array_equal(noisy.data, simulate(scene, p, real, workers=4).data))

# Differential readout records the on port minus the off port.
diff = simulate(scene, p, OpticsConfig.ideal(readout="differential"))
print("differential range:", float(diff.data.min()), float(diff.data.max()))
