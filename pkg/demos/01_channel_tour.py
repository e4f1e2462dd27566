"""A walk through the simulated radio link.

Samples a multipath channel, checks the properties everything downstream
relies on (bounded rank, transpose reciprocity, metered noise) and lets the
scattering environment drift a little.
"""
import numpy as np

from airsplit.channel import (NOISELESS, NoiseModel, channel_snr,
                              evolve_channel, sample_channel,
                              transmit_backward, transmit_forward)
from airsplit.linalg import crandn, make_rng, matrix_rank

rng = make_rng(0, 0)

print("== a 6x4 channel built from 3 scattering paths ==")
state = sample_channel(n_tx=4, n_rx=6, n_paths=3, rng=rng)
h = state.matrix
print(f"matrix shape {h.shape}, rank {matrix_rank(h)} (paths: {state.paths.gains.size})")
print("the rank never exceeds the path count, however many antennas you add")

print()
print("== reciprocity ==")
x = crandn(rng, (4, 1))
g = crandn(rng, (6, 1))
fwd = transmit_forward(state, x, NOISELESS)
bwd = transmit_backward(state, g, NOISELESS)
print(f"forward is H @ x        (check: {np.max(np.abs(fwd - h @ x)):.2e})")
print(f"backward is H.T @ g     (check: {np.max(np.abs(bwd - h.T @ g)):.2e})")
print("the reverse link is the plain transpose, not the conjugate transpose,")
print("so a gradient can ride back without anyone estimating H")

print()
print("== noise is metered against the channel, not hardcoded ==")
for snr_db in (35.0, 10.0, 0.0):
    nm = NoiseModel(snr_db=snr_db)
    realized = channel_snr(state, nm.total_power(state))
    print(f"requested {snr_db:5.1f} dB -> realized {realized:5.1f} dB")

print()
print("== slow drift ==")
for rho, steps in ((1e-4, 100), (1e-1, 100)):
    drifted = state
    evo_rng = make_rng(0, 1)
    for _ in range(steps):
        drifted = evolve_channel(drifted, rho, evo_rng)
    dev = np.linalg.norm(drifted.matrix - h) / np.linalg.norm(h)
    print(f"rho={rho:g}: relative change after {steps} steps = {dev:.4f}")
print("per-step mixing keeps each path physical; rho=0 would be bit-exact")
