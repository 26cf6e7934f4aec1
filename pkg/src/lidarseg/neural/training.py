"""Minibatch training, inference, and input conditioning.

A training sample is a pair (input, target): input is a (2, H, W) float
array holding the scaled depth and the reflectivity channel, target is an
(H, W) uint8 label grid with 255 on pixels that carry no annotation.
Runs are deterministic for a fixed seed: batches come from one seeded
generator and every op is a deterministic numpy kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labels import UNLABELED
from ..projection import LidarImage
from .layers import softmax, softmax_cross_entropy
from .network import LiLaNet
from .optim import Adam, AdamConfig

# Depth is in meters; scaling it near unit range keeps the MSRA-initialized
# activations well conditioned. Reflectivity is already in [0, 1].
DEFAULT_DEPTH_SCALE = 0.1

FINETUNE_LR = 1e-4


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 5
    iterations: int = 1000
    seed: int = 0
    depth_scale: float = DEFAULT_DEPTH_SCALE


def network_input(image: LidarImage, depth_scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    """(2, H, W) float32 network input; invalid cells are zero in both channels."""
    return np.stack([image.depth * np.float32(depth_scale), image.reflectivity]).astype(np.float32)


def train(net: LiLaNet, dataset, config: TrainConfig, stop_check=None, stop_check_every: int = 100):
    """Adam-train the network in place; returns the per-iteration loss trace.

    `stop_check(net)` is polled every `stop_check_every` iterations and may
    end the run early (the trace is simply shorter). Restarting with the
    same seed, data and iteration count reproduces the trace bit-exactly.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    opt = Adam(net.parameters(), AdamConfig(learning_rate=config.learning_rate))
    rng = np.random.default_rng(config.seed)
    trace = []
    for it in range(config.iterations):
        idx = rng.integers(0, len(dataset), size=config.batch_size)
        x = np.stack([dataset[i][0] for i in idx])
        y = np.stack([dataset[i][1] for i in idx])
        logits = net.forward(x)
        loss, grad_logits = softmax_cross_entropy(logits, y, ignore=UNLABELED)
        net.zero_grad()
        net.backward(grad_logits.astype(net.dtype))
        opt.step()
        trace.append(loss)
        if stop_check is not None and (it + 1) % stop_check_every == 0 and stop_check(net):
            break
    return trace


def predict(net: LiLaNet, x: np.ndarray):
    """Argmax labels and max-softmax confidence for a batch of inputs.

    Ties take the lowest class id (numpy argmax picks the first maximum).
    """
    logits = net.forward(np.ascontiguousarray(x, dtype=net.dtype))
    probs = softmax(logits)
    labels = np.argmax(logits, axis=1).astype(np.uint8)
    confidence = np.max(probs, axis=1)
    return labels, confidence


def infer_image(net: LiLaNet, image: LidarImage, depth_scale: float = DEFAULT_DEPTH_SCALE):
    """Per-cell labels/confidence for one image; invalid cells are UNLABELED."""
    labels, confidence = predict(net, network_input(image, depth_scale)[None])
    labels, confidence = labels[0], confidence[0]
    labels[~image.valid] = UNLABELED
    confidence[~image.valid] = 0.0
    return labels, confidence


def pixel_accuracy(net: LiLaNet, dataset) -> float:
    """Fraction of annotated pixels the network labels correctly."""
    correct = 0
    total = 0
    for x, y in dataset:
        labels, _ = predict(net, x[None])
        valid = y != UNLABELED
        correct += int((labels[0][valid] == y[valid]).sum())
        total += int(valid.sum())
    if total == 0:
        raise ValueError("dataset has no annotated pixels")
    return correct / total
