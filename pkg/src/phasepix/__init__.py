"""Pixel-wise programmable-exposure sensor simulation and HDR video
reconstruction."""

from .core import (
    CameraModel,
    ConfigurationError,
    ExposureClass,
    FormatError,
    MetricsReport,
    SamplingPattern,
    TransientSignalModel,
    TruncationError,
    ValidationError,
    VideoCube,
    load_vcube,
    save_vcube,
)
from .sensor import (
    ExposureCube,
    add_noise,
    apply_crf,
    integrate,
    invert_crf,
    normalize_hdr,
    quantize,
    render_exposure_cube,
    sample,
)
from .synthesis import (
    LdrStack,
    box_filter_reconstruct,
    fuse_hdr,
    interpolate_class,
    interpolate_ldr,
    mu_law_tonemap,
    reconstruct,
    single_class_reconstruct,
)
from .metrics import (
    EdgeAnalysis,
    full_duration,
    mssim,
    mssim_video,
    psnr,
    slanted_edge_mtf,
    temporal_contrast,
)
from .analysis import (
    SnrCurve,
    SpectrumRequest,
    averaged_psf_spectrum,
    averaged_spectrum,
    averaged_spectrum_closed_form,
    exposure_spectrum,
    optimal_exposure,
    phase_pixel_spectrum,
    psf_spectrum,
    snr_curve,
    snr_value,
)
from .scenes import (
    DatasetManifest,
    SceneSpec,
    augment_rotations,
    crop_cubes,
    gen_scene,
    ingest_hdr_sequence,
    make_dataset,
)
from .config import load_camera_config, load_pattern_config

__version__ = "0.1.0"
