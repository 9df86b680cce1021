"""Continuous-label augmentation for multi-label attribute classification.

Categorical attribute labels are mapped to a single continuous vector per
example (the signed sum of the attributes' word-embedding vectors) and used
as an auxiliary regression target next to the usual per-attribute binary
cross entropy.
"""

from .embeddings import (
    EmbeddingParseError,
    EmbeddingTable,
    OutOfVocabularyError,
    attribute_vector,
    load_embedding_file,
    lookup,
    parse_embedding_file,
    serialize_table,
    synthetic_table,
)
from .labelspace import (
    AttributeSpace,
    build_attribute_space,
    sign_labels,
    synthesize_batch,
    synthesize_continuous_label,
)
from .losses import (
    JointLossConfig,
    LossGradients,
    Prediction,
    bce_loss,
    finite_difference_check,
    joint_loss,
    joint_loss_grad,
    mse_loss,
)
from .net import (
    ModelParams,
    NetworkShape,
    SgdConfig,
    TrainOptions,
    TrainingDiverged,
    backward,
    evaluate,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
    train,
)
from .regularizers import DisturbConfig, centre_crop, disturb_labels, five_crop_flip
from .dataset import (
    AnnotationParseError,
    DatasetSplits,
    Split,
    SyntheticSpec,
    generate_synthetic,
    parse_annotations,
    subsample_fraction,
)
from .metrics import mean_accuracy
from .harness import (
    ExperimentConfig,
    MethodSwitches,
    default_config,
    run_comparison,
    run_fraction_sweep,
    select_alpha,
)

__version__ = "0.1.0"
