"""Spatial CUSUM detection of irregular signal regions in gridded data."""

__version__ = "0.1.0"

from .errors import (DegenerateSampleError, InvalidArgumentError, InvariantViolation,
                     ScusumError, StateError, UnsupportedSizeError)
from .field import Block, BlockPartition, Offset, SpatialField, all_offsets, partition
from .core import (BlockSummary, OrderedSequence, TheoryInstance, WeightMap, cusum_transform,
                   cutoff_index, neighbor_size, order_summaries, signal_weights,
                   summarize_block)
from .threshold import (DensityModel, DetectionResult, ThresholdDecision, detect,
                        detect_from_weights, estimate_density, find_valley, mfdr_curve,
                        null_interpolate, pick_threshold)
from .baselines import PValueField, bh_fdr, fdr_l, to_pvalues
from .simulate import GroundTruthMask, SimConfig, gen_expcov, gen_iid, generate, lh_mask
from .bench import Metrics, run_benchmark, score
