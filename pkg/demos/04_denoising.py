"""Receiver-side denoising: the effective link is matched to a diffusion
step and a deterministic reverse pass cleans the latent.

Run:  python3 demos/04_denoising.py
"""

import numpy as np

from shufflecast.channel import EffectiveLink
from shufflecast.diffusion import denoise, gaussian_mmse_predictor, make_schedule, step_match
from shufflecast.numerics import make_rng

schedule = make_schedule(1000, "linear")
pred = gaussian_mmse_predictor()
rng = make_rng(7)
f = rng.standard_normal(512)

print(f"{'SNR':>4} {'t':>5} {'MSE before':>11} {'after':>8} {'posterior bound':>16}")
for snr in (0, 5, 10, 15, 20):
    tau = 10 ** (-snr / 20)
    link = EffectiveLink(0.9, tau)
    f_hat = link.alpha * f + tau * rng.standard_normal(f.size)
    t, _ = step_match(link.alpha, tau, schedule)
    out = denoise(f_hat, link, schedule, pred)
    bb = tau ** 2 / (link.alpha ** 2 + tau ** 2)
    print(f"{snr:>4} {t:>5} {np.mean((f_hat / link.alpha - f) ** 2):11.4f} {np.mean((out - f) ** 2):8.4f} "
          f"{pred.posterior_mse(bb):16.4f}")
