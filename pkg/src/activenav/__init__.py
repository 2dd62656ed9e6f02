"""Desk-scale active-perception simulation toolkit.

Builds synthetic detector-confidence manifolds over a polar pose grid,
generates nearest-above-threshold navigation labels, trains a proposal
regressor, runs detect/propose/traverse episodes, and benchmarks four
navigation policies side by side.
"""

__version__ = "0.1.0"

from .episodes import EpisodeConfig, EpisodeRecord, measure, run_episode
from .errors import (
    ActiveNavError,
    ConfigError,
    DataFormatError,
    EmptyDatasetError,
    FieldError,
    GridError,
    NetworkError,
    NoValidPoseError,
)
from .evaluation import (
    EvalConfig,
    Report,
    evaluate,
    improvement_rate,
    sample_initial_poses,
    success_rate,
)
from .fields import (
    AngularLobe,
    ConfidenceField,
    ManifoldTable,
    confidence,
    export_manifold,
    preset_car,
    preset_person,
    read_manifold_csv,
    write_manifold_csv,
)
from .geometry import (
    Observation,
    Pose,
    PoseGrid,
    Proposal,
    WorldConfig,
    make_grid,
    observe,
    pose_at,
    trajectory,
    wrap_angle,
    wrap_signed,
)
from .labels import (
    Dataset,
    DatasetRecord,
    NavigationLabel,
    denormalize,
    generate_dataset,
    label_from_target,
    nearest_above,
    normalize,
    read_dataset,
    write_dataset,
)
from .network import (
    AdamState,
    NavNet,
    TrainReport,
    adam_step,
    backward,
    forward,
    init_adam,
    init_net,
    load_model,
    loss,
    predict_proposal,
    save_model,
    train,
)
from .policies import (
    ClassifierPolicy,
    DirectionClass,
    OraclePolicy,
    RandomPolicy,
    RegressionPolicy,
    StaticPolicy,
    class_centroid,
    load_classifier,
    policy_oracle,
    policy_random,
    policy_regression,
    policy_static,
    quantize_label,
    save_classifier,
    train_classifier,
)
from .seeding import derive_seed
