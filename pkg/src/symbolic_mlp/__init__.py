"""Multilayer perceptrons on symbolic data.

Symbolic variables (intervals, categories, category subsets, probability
distributions) are recoded into numeric column blocks, fed to a plain
feed-forward network with type-matched output blocks and losses, and
trained with category-normalized weight decay, random restarts, and
validation-based early stopping.
"""

__version__ = "0.1.0"

from .symbolic import (
    MISSING,
    Category,
    CategorySet,
    Distribution,
    Interval,
    Missing,
    Number,
    Role,
    SchemaError,
    SymbolicTable,
    SymbolicValue,
    Taxonomy,
    ValidationError,
    ValidationResult,
    VariableKind,
    VariableSpec,
    validate_value,
)
from .table_io import (
    load_csv_table,
    load_table,
    parse_table,
    save_table,
    serialize_table,
)
from .recoding import (
    BlockKind,
    CodingTag,
    ColumnGroup,
    EncodedMatrix,
    EncodingError,
    MissingValueError,
    OutputBlockSpec,
    Standardizer,
    build_output_blocks,
    decode_output_block,
    decode_outputs,
    encode_categorical_multi,
    encode_categorical_single,
    encode_interval,
    encode_modal,
    encode_quantitative,
    encode_table,
    encode_targets,
    encode_taxonomy,
    fit_standardizer,
)
from .mlp import (
    Activation,
    ActivationTrace,
    MlpArchitecture,
    activation_apply,
    backward,
    count_weights,
    forward,
    load_model,
    outputs,
    save_model,
    single_hidden,
)
from .objective import (
    BlockLossReport,
    DecayPolicy,
    EncodedDataset,
    composite_loss,
    cross_entropy_loss,
    decay_coefficients,
    decay_penalty,
    independent_cross_entropy_loss,
    make_objective,
    mean_composite_loss,
    quadratic_loss,
    regularized_empirical_error,
    weighted_multinomial_loss,
)
from .training import (
    EarlyStopping,
    FitReport,
    MinimizeTrace,
    TrainConfig,
    TrainingError,
    minimize,
    train,
)
from .model_selection import (
    CvReport,
    SelectionPlan,
    SelectionReport,
    k_fold_cv,
    k_fold_indices,
    split_counts,
    split_dataset,
    split_indices,
    sweep,
)
from .imputation import (
    DEGRADATION_LEVELS,
    DEGRADATION_MISSING_SLOTS,
    ImputationError,
    impute_knn,
    impute_mean,
    interpolate_periodic,
)
from .climate import (
    CODING_DIMS,
    CODING_METHODS,
    Station,
    apply_coding,
    degrade,
    degraded_inputs,
    generate_synthetic_stations,
    load_stations,
    run_degradation_study,
    run_full_experiment,
    run_location_experiment,
    save_stations,
)
