"""Sensorimotor space workbench.

A simulated mobile agent with a redundant planar arm learns to predict
raw camera images from raw motor commands; the package provides the
simulator, a from-scratch neural predictor, dissimilarity metrics that
compare the learned motor representation with the hidden sensor
geometry, and executable verification of the underlying equivalence-class
structure.
"""

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    FormatError,
    InfeasibleTargetError,
    SmspaceError,
    TrainingFault,
)
from .kinematics import ArmGeometry, DEFAULT_GEOMETRY, displacement, forward
from .world import (
    EnvironmentSpec,
    SceneObject,
    boundary_mask,
    generate_environment,
    load_environment,
    render,
    render_batch,
    save_environment,
    shift_environment,
)
from .explorer import (
    Dataset,
    ExplorationMode,
    Transition,
    collect,
    load_dataset,
    load_provenance,
    save_dataset,
    save_provenance,
)
from .neuralnet import (
    Mlp,
    TrainConfig,
    build_networks,
    encode,
    gradient,
    load_networks,
    loss_forward,
    numeric_gradient,
    predict,
    save_networks,
    train,
)
from .metrics import (
    AlignmentMap,
    DissimilarityReport,
    RepresentationSample,
    align,
    dissimilarity,
    dissimilarity_naive,
    evaluate,
    sample_grid,
)
from .equivalence import (
    EquivalentPair,
    distractor_pair,
    find_equivalent_pair,
    find_position_equivalent,
    measure_render_lipschitz,
    run_metric_class_suite,
    run_position_class_suite,
    verify_compensability_suite,
    verify_metric_class,
    verify_position_class,
)

__version__ = "0.1.0"
