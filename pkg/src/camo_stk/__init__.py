"""Spatiotemporal operator kernels and evaluation harness for video
camouflaged-object segmentation.

Subpackages: ``tensor`` (rank-5 arrays, resizing, dumps), ``cdc3d``
(central-difference convolution), ``align`` (deformable trajectory
alignment), ``stabilize`` (concept-token attention), ``metrics`` /
``metrics_naive`` (seven-metric evaluation plus loop oracles),
``dataset`` (manifests, windows, density maps), ``gradcheck``,
``bench`` and ``cli``.
"""

from .align import (DEFAULT_SAMPLE_POINTS, ModulationMask, OffsetField, TaaSpec,
                    deform_sample, deform_sample_backward, predict_trajectory,
                    taa_fuse)
from .cdc3d import (DEFAULT_THETA, THETA_ERRATIC_MOTION, ConvSpec3D,
                    cdc3d_backward, cdc3d_forward_fusion, cdc3d_forward_unified,
                    conv3d_plain)
from .dataset import (ATTRIBUTES, ClipManifest, DensityMap, ManifestError,
                      WindowSample, attribute_report, density_map, load_manifest,
                      make_windows)
from .metrics import (MaskPair, MetricReport, dice_iou, e_measure,
                      evaluate_sequence, f_measure_max, f_measure_weighted, mae,
                      s_measure)
from .stabilize import (DEFAULT_EMBED_DIM, DEFAULT_PRIMITIVE_PAIRS, AttentionSpec,
                        PrimitiveBank, attention_oracle, augmented_attention,
                        gaussian_bank, mix_primitives)
from .tensor import (Shape5, ShapeError, Tensor5, gaussian_init, read_tensor,
                     resize_bilinear_spatial, write_tensor, zeros)

__version__ = "0.1.0"

__all__ = [
    "ATTRIBUTES", "AttentionSpec", "ClipManifest", "ConvSpec3D",
    "DEFAULT_EMBED_DIM", "DEFAULT_PRIMITIVE_PAIRS", "DEFAULT_SAMPLE_POINTS",
    "DEFAULT_THETA", "DensityMap", "ManifestError", "MaskPair", "MetricReport",
    "ModulationMask", "OffsetField", "PrimitiveBank", "Shape5", "ShapeError",
    "TaaSpec", "Tensor5", "THETA_ERRATIC_MOTION", "WindowSample",
    "attention_oracle", "attribute_report", "augmented_attention",
    "cdc3d_backward", "cdc3d_forward_fusion", "cdc3d_forward_unified",
    "conv3d_plain", "deform_sample", "deform_sample_backward", "density_map",
    "dice_iou", "e_measure", "evaluate_sequence", "f_measure_max",
    "f_measure_weighted", "gaussian_bank", "gaussian_init", "load_manifest",
    "mae", "make_windows", "mix_primitives", "predict_trajectory", "read_tensor",
    "resize_bilinear_spatial", "s_measure", "taa_fuse", "write_tensor", "zeros",
]
