"""The segmentation network: five inception-style blocks over a 2-channel
cylindrical image, ending in a 1x1 classifier over the 13 classes.

Each block runs 7x3, 3x7 and 3x3 convolutions (plus ReLU) in parallel to
cope with the extreme aspect ratio of scanner images, concatenates the
three branches and compresses the tripled width back to the branch width
through a 1x1 bottleneck. No pooling or striding anywhere: the output
keeps full resolution.
"""

from __future__ import annotations

import numpy as np

from .layers import Conv2d, Parameter, ReLU, concat_channels, split_channels

FULL_WIDTHS = (96, 128, 256, 256, 128)
REDUCED_WIDTHS = (8, 12, 16, 16, 12)

IN_CHANNELS = 2
NUM_CLASSES = 13


def msra_kernel(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Zero-mean normal weights with variance 2 / fan_in; biases stay zero."""
    out_ch, in_ch, kh, kw = shape
    std = np.sqrt(2.0 / (in_ch * kh * kw))
    return rng.normal(0.0, std, size=shape).astype(dtype)


class LiLaBlock:
    def __init__(self, in_channels: int, width: int, dtype=np.float32, name: str = "block"):
        self.width = width
        self.branch_73 = Conv2d(in_channels, width, 7, 3, dtype, f"{name}.branch73")
        self.branch_37 = Conv2d(in_channels, width, 3, 7, dtype, f"{name}.branch37")
        self.branch_33 = Conv2d(in_channels, width, 3, 3, dtype, f"{name}.branch33")
        self.bottleneck = Conv2d(3 * width, width, 1, 1, dtype, f"{name}.bottleneck")
        self._relus = [ReLU() for _ in range(4)]

    def convs(self) -> list[Conv2d]:
        return [self.branch_73, self.branch_37, self.branch_33, self.bottleneck]

    def parameters(self) -> list[Parameter]:
        return [p for conv in self.convs() for p in conv.parameters()]

    def relu_masks(self) -> list[np.ndarray]:
        return [r.mask for r in self._relus]

    def forward(self, x: np.ndarray) -> np.ndarray:
        r73, r37, r33, r_out = self._relus
        a = r73.forward(self.branch_73.forward(x))
        b = r37.forward(self.branch_37.forward(x))
        c = r33.forward(self.branch_33.forward(x))
        return r_out.forward(self.bottleneck.forward(concat_channels(a, b, c)))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        r73, r37, r33, r_out = self._relus
        g = self.bottleneck.backward(r_out.backward(grad_out))
        ga, gb, gc = split_channels(g, [self.width] * 3)
        return (
            self.branch_73.backward(r73.backward(ga))
            + self.branch_37.backward(r37.backward(gb))
            + self.branch_33.backward(r33.backward(gc))
        )


class LiLaNet:
    """Five LiLaBlocks plus a 1x1 classifier conv (logits, no final ReLU)."""

    def __init__(self, widths=REDUCED_WIDTHS, in_channels: int = IN_CHANNELS,
                 num_classes: int = NUM_CLASSES, dtype=np.float32):
        if len(widths) != 5:
            raise ValueError("exactly five block widths required")
        self.widths = tuple(int(w) for w in widths)
        self.in_channels = in_channels
        self.num_classes = num_classes
        self.dtype = np.dtype(dtype)
        self.blocks = []
        ch = in_channels
        for i, w in enumerate(self.widths):
            self.blocks.append(LiLaBlock(ch, w, dtype, name=f"block{i + 1}"))
            ch = w
        self.classifier = Conv2d(ch, num_classes, 1, 1, dtype, "classifier")

    def convs(self) -> list[Conv2d]:
        return [c for blk in self.blocks for c in blk.convs()] + [self.classifier]

    def parameters(self) -> list[Parameter]:
        return [p for conv in self.convs() for p in conv.parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def relu_state(self) -> bytes:
        """Packed activation pattern of the last forward pass (for kink
        detection in finite-difference checks)."""
        return b"".join(np.packbits(m).tobytes() for blk in self.blocks for m in blk.relu_masks())

    def initialize(self, seed: int = 0):
        """MSRA-init every kernel (biases zero) from one seeded generator."""
        rng = np.random.default_rng(seed)
        for conv in self.convs():
            conv.kernel.value = msra_kernel(conv.kernel.value.shape, rng, self.dtype)
            conv.bias.value = np.zeros_like(conv.bias.value)
        return self

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"expected (b, {self.in_channels}, h, w) input, got {x.shape}")
        x = np.ascontiguousarray(x, dtype=self.dtype)
        for blk in self.blocks:
            x = blk.forward(x)
        return self.classifier.forward(x)

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = self.classifier.backward(grad_logits)
        for blk in reversed(self.blocks):
            g = blk.backward(g)
        return g

    def astype(self, dtype) -> "LiLaNet":
        """Copy of the network with weights cast to another dtype."""
        other = LiLaNet(self.widths, self.in_channels, self.num_classes, dtype)
        for mine, theirs in zip(self.parameters(), other.parameters()):
            theirs.value = mine.value.astype(dtype)
        return other
