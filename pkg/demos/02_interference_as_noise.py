"""End-to-end link with eight users: after compensation and demapping the
error on user 0 behaves like white noise of variance tau^2.

Run:  python3 demos/02_interference_as_noise.py
"""

import numpy as np

from shufflecast.beamforming import mrt
from shufflecast.channel import (compensate_demap, effective_link, gen_channels, receive, snr_db_to_sigma2,
                                 transmit)
from shufflecast.numerics import make_rng
from shufflecast.shuffle import gen_pattern, map_c

rng = make_rng(3)
K = Nt = 8
dim = 512
sigma2 = snr_db_to_sigma2(10.0)
h = gen_channels(Nt, K, rng).h
v = mrt(h).v
link = effective_link(h, v, sigma2, 0)
print(f"user 0: alpha = {link.alpha:.4f}, tau^2 = {link.tau ** 2:.4f}, SINR = {10 * np.log10(link.alpha ** 2 / link.tau ** 2):.2f} dB")

err = []
for _ in range(100):
    f = rng.standard_normal((K, dim))
    pats = [gen_pattern(int(k), dim) for k in rng.integers(0, 2 ** 63, K)]
    y = receive(transmit(np.stack([map_c(f[k], pats[k]) for k in range(K)]), v), h[0], sigma2, rng)
    err.append(compensate_demap(y, h[0], v[0], pats[0]) - link.alpha * f[0])
err = np.concatenate(err)
print(f"empirical error variance {err.var():.4f} over {err.size} samples")
print(f"lag-1 correlation of the error {np.corrcoef(err[:-1], err[1:])[0, 1]:+.4f}")
