"""Pushframe camera simulation and reconstruction.

A scene moves across a static (optionally scrambled) Hadamard mask on a DMD;
a linear detector sums each mask column at every step, and the scene is
recovered column by column from those coded sums.
"""

from .errors import (ConfigError, ConstraintInfeasibleError, DigestMismatchError, FormatError,
                     InvalidOrderError, PushframeError)
from .forward import (FrameStack, IlluminationField, OpticsConfig, integrate_columns,
                      render_frame, simulate, white_calibration)
from .metrics import QualityReport, line_artifact_score, psnr, rmse, ssim
from .pattern import (PatternSpec, default_max_run, load_pattern, max_row_run, save_pattern,
                      scramble, sylvester, to_binary_mask)
from .recon import (correct_2d, flat_field, fwht, reconstruct, reconstruct_column,
                    shear_correct, shift_columns)
from .scene import SceneImage, column_at, load_image, resample_height, save_image, synthetic
from .stream import CalibrationData, MeasurementStream, ReconImage

__version__ = "0.1.0"
