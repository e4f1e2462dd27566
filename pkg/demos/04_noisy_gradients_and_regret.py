"""Why training survives an unestimated, noisy backward link.

Part one measures the gradient the reverse channel delivers: noisy draw by
noisy draw it scatters, but its average lands on the noiseless gradient.
Part two runs online least squares with that kind of corrupted step and
watches the average regret fall off as roughly 1/sqrt(T), with a noise
penalty that only shifts the curve's level.
"""
import numpy as np

from airsplit.channel import NOISELESS, NoiseModel, sample_channel
from airsplit.linalg import crandn, make_rng
from airsplit.oac import OacDesign, OacLayer
from airsplit.runtime import RegretConfig, regret_experiment

print("== the backward link is an unbiased gradient channel ==")
rng = make_rng(2, 0)
channel = sample_channel(4, 4, 6, rng)
layer = OacLayer(OacDesign("receiver", "separated"), 6, 5, 4, 4, 2, rng)
x = crandn(rng, (6, 2))
_, transcript = layer.forward(x, channel, NOISELESS)
g_y = crandn(rng, (5, 2))
clean = layer.backward(transcript, g_y, channel, NOISELESS).g_x

noise = NoiseModel(snr_db=10.0)
noise_rng = make_rng(2, 1)
for n_draws in (10, 100, 1000):
    total = np.zeros_like(clean)
    for _ in range(n_draws):
        total += layer.backward(transcript, g_y, channel, noise,
                                rng=noise_rng).g_x
    err = np.linalg.norm(total / n_draws - clean) / np.linalg.norm(clean)
    print(f"mean over {n_draws:4d} noisy draws: relative distance to "
          f"noiseless gradient {err:.3f}")
print("the distance shrinks like 1/sqrt(draws): pure variance, no bias")

print()
print("== noisy online optimization still converges ==")
cfg = RegretConfig(dim=16, obs=4, steps=20_000, sigmas=(0.0, 0.1, 0.4),
                   n_seeds=4, seed=0, fit_floor=50)
print(f"least squares in C^{cfg.dim}, {cfg.steps} steps, "
      f"step noise levels {cfg.sigmas}")
result = regret_experiment(cfg)
for sigma, slope, final in zip(cfg.sigmas, result.slopes, result.final):
    print(f"  sigma={sigma:3.1f}: avg-regret slope {slope:+.3f}, "
          f"final level {final:8.4f}")
print(f"measured level ratio (heaviest vs lightest noise): "
      f"{result.measured_ratio:.2f}")
print(f"predicted from the fitted noise-independent offset: "
      f"{result.predicted_ratio:.2f}")
print("noise does not change the decay rate, only the constant in front,")
print("which is why a noisy gradient channel is usable for training at all")
