"""Coarse-to-fine multimodal image registration.

Mutual-information similarity search aligns the pair globally; Demons on
Canny edge potentials then recovers the residual free-form deformation.
"""

from .coarse import CoarseResult, OptimizerConfig, crop_roi, mi_objective_gradient, register_coarse, \
    regular_step_descent
from .config import PipelineConfig, config_from_dict, load_config
from .demons import DemonsConfig, DemonsResult, demons_register, demons_step, mse
from .edges import EdgeConfig, canny, edge_potential
from .evaluation import EvalReport, checkerboard, landmark_error, map_landmarks, registered_correspondences
from .imaging import SimilarityParams, bicubic_sample, downsample2, gaussian_smooth, upsample_field2, warp_field, \
    warp_similarity
from .io import load_field, load_image, load_landmarks, save_field, save_image, save_landmarks
from .metrics import JointHistogram, entropy, joint_histogram, mutual_information, sampled_mi
from .pipeline import run_pipeline, run_pipeline_arrays
from .synth import SynthOptions, SynthPair, generate_pair

__version__ = "0.1.0"
