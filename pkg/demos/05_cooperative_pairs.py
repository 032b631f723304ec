"""Users asking for the same content are paired and their beams phase
aligned so the duplicated signal adds coherently at both receivers.

Run:  python3 demos/05_cooperative_pairs.py
"""

import numpy as np

from shufflecast.beamforming import LogisticParams, optimize_correlated, optimize_uncorrelated
from shufflecast.channel import effective_link, gain_matrix, gen_channels, snr_db_to_sigma2
from shufflecast.grouping import build_weights, group_users, semantic_group, similarity_matrix
from shufflecast.harness import comp_link
from shufflecast.numerics import make_rng

rng = make_rng(9)
K = Nt = 8
sigma2 = snr_db_to_sigma2(0.0)
p = LogisticParams()

# Four contents, each requested twice; embeddings carry a little per-user jitter.
content = rng.standard_normal((4, 16))
emb = np.repeat(content, 2, axis=0) + 0.05 * rng.standard_normal((K, 16))
R = similarity_matrix(emb)
print("similarity groups at th=0.5:", semantic_group(R, 0.5))

h = gen_channels(Nt, K, rng).h
groups = group_users(R, 0.5, h, sigma2, 1.0, p)
print("transmission pairs:", groups)

res, _ = optimize_correlated(h, sigma2, 1.0, p, build_weights(groups, R), groups)
plain, _ = optimize_uncorrelated(h, sigma2, 1.0, p)
G = gain_matrix(h, res.beamformers.v)
print("pair phase residuals (rad):", {g: f"{r:.1e}" for g, r in res.phase_residual.items()})
print(f"\n{'user':>4} {'alpha COMP':>11} {'alpha plain':>12}")
for k in range(K):
    a_comp = comp_link(G, res.psi, groups, R, sigma2, k).alpha
    print(f"{k:>4} {a_comp:11.4f} {effective_link(h, plain.v, sigma2, k).alpha:12.4f}")
