from .base import Simulator, chunk_distance
from .lotka_volterra import LotkaVolterra, generate_lv_dataset, lv_simulate_batch, lv_simulate_interval
from .race import (
    RaceBlocks,
    RaceConstants,
    RaceDifficult,
    race_accept_weight,
    race_decision_batch,
    race_trial,
    rt_dataset_summary,
)
from .stable import StableIID, generate_stable_dataset, stable_char_function, stable_sample
from .sv import generate_sv_dataset, sv_latent_block, sv_sample_block, sv_sample_block_thetas
from .toy import FoldedMeanIID, GaussianIID, generate_folded_dataset, generate_gaussian_dataset
from .transforms import TRANSFORMS, transform_params

__all__ = [
    "Simulator",
    "chunk_distance",
    "LotkaVolterra",
    "generate_lv_dataset",
    "lv_simulate_batch",
    "lv_simulate_interval",
    "RaceBlocks",
    "RaceConstants",
    "RaceDifficult",
    "race_accept_weight",
    "race_decision_batch",
    "race_trial",
    "rt_dataset_summary",
    "StableIID",
    "generate_stable_dataset",
    "stable_char_function",
    "stable_sample",
    "generate_sv_dataset",
    "sv_latent_block",
    "sv_sample_block",
    "sv_sample_block_thetas",
    "FoldedMeanIID",
    "GaussianIID",
    "generate_folded_dataset",
    "generate_gaussian_dataset",
    "TRANSFORMS",
    "transform_params",
]
