"""Hierarchical-latent diffusion autoencoder toolkit."""

from .schedule import NoiseSchedule, StepPlan, make_linear_schedule, make_step_plan
from .diffusion import (q_sample, ddim_step, ddim_invert_step, noise_loss,
                        generate, encode_stochastic)
from .codes import HierarchicalCode, EncodedImage
from .nets import (Variant, ModelConfig, Autoencoder, encode_semantic,
                   save_checkpoint, load_checkpoint, config_hash)
from .training import TrainConfig, EMA, train, reconstruct_batch, split_train_val

__all__ = [
    "NoiseSchedule", "StepPlan", "make_linear_schedule", "make_step_plan",
    "q_sample", "ddim_step", "ddim_invert_step", "noise_loss", "generate",
    "encode_stochastic", "HierarchicalCode", "EncodedImage", "Variant",
    "ModelConfig", "Autoencoder", "encode_semantic", "save_checkpoint",
    "load_checkpoint", "config_hash", "TrainConfig", "EMA", "train",
    "reconstruct_batch", "split_train_val",
]

__version__ = "0.1.0"
