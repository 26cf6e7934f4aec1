"""lidarseg: cylindrical LiDAR images, cross-modal autolabeling, and a
from-scratch CNN for point-wise semantic labeling of rotating-scanner data.
"""

from . import autolabel, datasets, evaluation, fileio, geometry, labels, neural, projection, synth

__all__ = [
    "autolabel",
    "datasets",
    "evaluation",
    "fileio",
    "geometry",
    "labels",
    "neural",
    "projection",
    "synth",
]

__version__ = "0.1.0"
