"""trajcomply: map-compliance losses, metrics, refinement and perturbation
for vehicle trajectory prediction."""

__version__ = "0.1.0"

from .errors import (
    DegenerateHeading,
    EmptyCenterlines,
    EmptyCorpus,
    LengthMismatch,
    NonFiniteLoss,
    ParseError,
    TrajComplyError,
    UnknownSceneId,
    ValidationError,
)
from .geometry import (
    DrivableArea,
    Polygon,
    SignedDistanceResult,
    point_in_area,
    points_in_area,
    signed_distance,
    signed_distance_batch,
)
from .losses import (
    LossConfig,
    LossValueAndGrad,
    LossWeights,
    aux_components,
    combined_aux_loss,
    direction_consistency_loss,
    diversity_loss,
    feasibility_indicator,
    heading_of,
    offroad_loss,
)
from .metrics import (
    CorpusReport,
    SceneReport,
    aggregate,
    evaluate_scene,
    min_ade,
    min_fde,
    miss_rate,
    quality_metrics,
)
from .perturb import TurnSpec, apply_turn
from .refine import (
    RefineConfig,
    RefineTrace,
    SweepRow,
    TraceRecord,
    alpha_sweep,
    original_loss,
    refine,
)
from .scene import (
    CenterlineSet,
    PredictionSet,
    Scene,
    Trajectory,
    load_predictions,
    load_scene,
    save_predictions,
    save_scene,
)

__all__ = [name for name in dir() if not name.startswith("_")]
