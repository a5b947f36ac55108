"""Training and export of desk-scale reference models for certiprop."""

from .export import checkpoint_to_canonical, export, save_checkpoint
from .train import train_toy

__version__ = "0.1.0"

__all__ = ["train_toy", "export", "checkpoint_to_canonical", "save_checkpoint"]
