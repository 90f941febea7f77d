from .init import glorot_uniform
from .layers import LAYER_KINDS, Conv2D, Dense, MaxPool2D, Network, ReLU, Sigmoid
from .loss import bce_grad, bce_with_logits, round_label, sigmoid
from .optim import Adam, AdamHyper
from .serialize import load_network, save_network
from .train import train

__all__ = [
    "Adam", "AdamHyper", "Conv2D", "Dense", "LAYER_KINDS", "MaxPool2D",
    "Network", "ReLU", "Sigmoid", "bce_grad", "bce_with_logits",
    "glorot_uniform", "load_network", "round_label", "save_network",
    "sigmoid", "train",
]
