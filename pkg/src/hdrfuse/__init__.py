"""Multi-exposure HDR fusion toolkit.

Classical adaptive-weight fusion, an unsupervised encoder-decoder network
that learns per-pixel fusion weight maps through a weighted-SSIM loss, and
a MEF-SSIM evaluator, all on plain numpy arrays.
"""

from .attributes import (AttributeKind, attribute_map, gamma_for_pair,
                         gamma_from_attributes, hybrid_attribute,
                         local_gradient, local_variance, local_wellexposedness,
                         render_attribute_maps)
from .classical import (ClassicalParams, adaptive_mef, combine_weights, fuse,
                        fuse_exposures, histogram_gradient_weight,
                        wellexposedness_weight)
from .image import (ExposurePair, ImageFormatError, PatchGrid, dynamic_range,
                    extract_patches, load_image, load_pair, save_image,
                    to_grayscale)
from .loss import LossConfig, weighted_ssim_loss
from .metrics import (MEF_SSIM_SPEC, MefSsimReport, SsimWindowSpec, mef_ssim,
                      ssim_window)
from .model import (ModelConfig, FusionNet, build_model, calibrate,
                    fuse_learned, predict_weights)
from .synthetic import synthetic_corpus, synthetic_pair
from .trainer import (GammaScoreTable, TrainConfig, evaluate_gamma_table,
                      load_config_file, table_configs, train)

__version__ = "0.1.0"

__all__ = [
    "AttributeKind", "ClassicalParams", "ExposurePair", "FusionNet",
    "GammaScoreTable", "ImageFormatError", "LossConfig", "MEF_SSIM_SPEC",
    "MefSsimReport", "ModelConfig", "PatchGrid", "SsimWindowSpec",
    "TrainConfig", "adaptive_mef", "attribute_map", "build_model",
    "calibrate", "combine_weights", "dynamic_range", "evaluate_gamma_table",
    "extract_patches", "fuse", "fuse_exposures", "fuse_learned",
    "gamma_for_pair", "gamma_from_attributes", "histogram_gradient_weight",
    "hybrid_attribute", "load_config_file", "load_image", "load_pair",
    "local_gradient", "local_variance", "local_wellexposedness", "mef_ssim",
    "predict_weights", "render_attribute_maps", "save_image", "ssim_window",
    "synthetic_corpus", "synthetic_pair", "table_configs", "to_grayscale",
    "train", "wellexposedness_weight",
]
