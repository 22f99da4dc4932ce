"""Latency-aware neural architecture search over a factorized block space."""

from .arch import (
    BlockChoices,
    BlockSpec,
    LayerShape,
    LayerSpec,
    NetworkArch,
    SearchSpaceSkeleton,
    propagate_shapes,
    uniform_variant,
    validate,
)
from .codec import TokenSequence, cardinality, decode, encode, flat_cardinality
from .controller import SearchConfig, SearchState, run_search
from .cost import (
    CostBreakdown,
    DeviceProfile,
    apply_depth_multiplier,
    apply_input_size,
    estimate_latency,
    kernel_cost_compare,
    layer_macs,
    layer_params,
)
from .evaluators import (
    Evaluation,
    ExternalEvaluator,
    ProfileLatency,
    SurrogateAccuracy,
    SurrogateConfig,
    evaluate,
    surrogate_accuracy,
)
from .pareto import ParetoFront, Point, dominates, extract_front, insert
from .reward import Measurement, RewardConfig, calibrate_exponent, reward

__version__ = "0.1.0"
