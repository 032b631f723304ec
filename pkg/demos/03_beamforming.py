"""Quality-aware beamforming: fit the SINR-to-quality curve, then compare
the MM solver with matched-filter, zero-forcing and WMMSE beams.

Run:  python3 demos/03_beamforming.py
"""

import numpy as np

from shufflecast.beamforming import (LogisticParams, fit_logistic, logistic_score_db, mrt, objective,
                                     optimize_uncorrelated, wmmse, zf)
from shufflecast.channel import gen_channels, sinr, snr_db_to_sigma2
from shufflecast.numerics import make_rng

# A quality curve measured at a handful of SINR points (synthetic here).
rng = make_rng(5)
x = np.linspace(-10, 25, 15)
y = logistic_score_db(x, LogisticParams(0.05, 0.9, 1.0, 0.8)) + 0.005 * rng.standard_normal(x.size)
p, rms = fit_logistic(np.column_stack([x, y]), full_output=True)
print(f"fitted a={p.a:.3f} b={p.b:.3f} c={p.c:.3f} e={p.e:.3f} (rms {rms:.4f})")

h = gen_channels(8, 8, make_rng(6)).h
print(f"\n{'SNR':>4} {'MM':>7} {'MRT':>7} {'ZF':>7} {'WMMSE':>7}  iters  min user SINR (MM, dB)")
for snr in (0, 5, 10, 15, 20):
    s2 = snr_db_to_sigma2(snr)
    bf, rep = optimize_uncorrelated(h, s2, 1.0, p)
    base = [objective(h, b, s2, 1.0, p) for b in (mrt(h), zf(h), wmmse(h, s2))]
    worst = 10 * np.log10(np.min(sinr(h, bf, s2)))
    print(f"{snr:>4} {rep.final_objective:7.3f} " + " ".join(f"{b:7.3f}" for b in base)
          + f"  {rep.iterations:5d}  {worst:6.2f}")
