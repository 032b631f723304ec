"""A full Monte Carlo sweep driven by a JSON config, the same path the
``shufflecast simulate-*`` commands take, summarized per SNR.

Run:  python3 demos/06_experiment_sweep.py [out.csv]
"""

import sys

import numpy as np

from shufflecast.harness import emit, load_config, run_experiment

config = {
    "scenario": "uncorrelated",
    "Nt": 8, "K": 8, "N": 256,
    "snr_db": [0, 5, 10, 15, 20],
    "seeds": list(range(20)),
    "source": {"structure": "ar1", "rho": 0.9},
    "denoiser": {"kind": "oracle-gaussian", "prior": "source"},
}

# Medians: a sum-rate allocation (WMMSE) may starve users, whose latent MSE is unbounded.
for bf in ("proposed", "mrt", "wmmse"):
    rows = run_experiment(load_config(dict(config, beamformer=bf)))
    print(f"\nbeamformer = {bf}")
    print(f"{'SNR':>4} {'MSE pre':>9} {'MSE post':>9} {'SINR dB':>8} {'starved':>8}")
    for snr in config["snr_db"]:
        cell = [r for r in rows if r.snr_db == snr]
        live = [r for r in cell if r.alpha > 1e-3]
        print(f"{snr:>4} {np.median([r.latent_mse_pre for r in live]):9.4f} "
              f"{np.median([r.latent_mse_post for r in live]):9.4f} "
              f"{10 * np.log10(np.median([r.gamma for r in cell])):8.2f} {len(cell) - len(live):>8}")

if len(sys.argv) > 1:
    emit(rows, "csv", sys.argv[1])
    print(f"\nwrote {len(rows)} rows to {sys.argv[1]}")
