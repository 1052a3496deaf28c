"""Learned exposure-stack synthesis and HDR fusion.

Trains two small 3D CNNs on datasets rendered by the sensor-simulation
toolkit: a U-net that expands a phase-multiplexed measurement into a
three-exposure stack, and a residual net that weights the per-exposure
irradiance estimates for fusion.  All data exchange happens through
`.vcube` files and dataset manifests; the packages share no code.
"""

from .io import Cube, CropDataset, load_manifest, load_vcube, save_vcube
from .losses import ReconstructionLoss, build_feature_extractor, mssim, mu_law
from .models import (
    HdrNet,
    HdrNetConfig,
    LdrNet,
    LdrNetConfig,
    ShapeError,
    build_hdr_net,
    build_ldr_net,
    fuse_exposures,
)
from .train import TrainConfig, load_hdr_model, load_ldr_model, train_hdr, train_ldr
from .infer import InferenceResult, run_inference

__all__ = [
    "Cube", "CropDataset", "load_manifest", "load_vcube", "save_vcube",
    "ReconstructionLoss", "build_feature_extractor", "mssim", "mu_law",
    "HdrNet", "HdrNetConfig", "LdrNet", "LdrNetConfig", "ShapeError",
    "build_hdr_net", "build_ldr_net", "fuse_exposures",
    "TrainConfig", "load_hdr_model", "load_ldr_model", "train_hdr", "train_ldr",
    "InferenceResult", "run_inference",
]

__version__ = "0.1.0"
