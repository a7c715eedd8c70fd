"""Conditional GAN estimator: architecture, losses, training and inference."""
from .arch import LayerSpec, LayerTrace, NetworkSpec, feature_map_shape, rescale_strides
from .losses import discriminator_loss, generator_loss, l1_term
from .networks import Discriminator, Generator
from .training import (TrainConfig, Trainer, TrainState, estimate, init_state, load_checkpoint,
                       save_checkpoint, train)

__all__ = [
    "LayerSpec", "LayerTrace", "NetworkSpec", "feature_map_shape", "rescale_strides",
    "discriminator_loss", "generator_loss", "l1_term", "Discriminator", "Generator",
    "TrainConfig", "Trainer", "TrainState", "estimate", "init_state", "load_checkpoint",
    "save_checkpoint", "train",
]
