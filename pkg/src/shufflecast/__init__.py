"""Latent-domain simulation of shuffle-orthogonalized multi-user semantic
communication: mapping, MU-MISO links, logistic-utility beamforming,
diffusion-style denoising and similarity-aware cooperative transmission."""

from .channel import (BeamformerSet, ChannelSet, EffectiveLink, effective_link, gain_matrix,
                      gen_channels, sinr, snr_db_to_sigma2)
from .diffusion import (DiffusionSchedule, GaussianMMSEPredictor, denoise, make_schedule,
                        step_match)
from .grouping import build_weights, group_users, refine_pairs, semantic_group
from .latent import LatentSourceConfig, generate_batch, load_latent_file, write_latent_file
from .numerics import make_rng
from .shuffle import ShufflePattern, demap_c, gen_pattern, map_c

__version__ = "0.1.0"
