"""Group-invariant embeddings built from sorted coorbits, with the numerical
tooling to test their separation and bi-Lipschitz behaviour."""

from .analysis import (
    BiLipschitzEstimate,
    OpaqueMap,
    SeparationReport,
    check_separation,
    estimate_bilipschitz,
    lipschitz_upper_bound,
    local_lower_probe,
    operator_norm,
)
from .embedding import (
    EmbeddingPipeline,
    Reduction,
    TemplateSet,
    coorbit,
    diag_form_pipeline,
    embed,
    embed_batch,
    embed_diag,
    frame_pipeline,
    sorted_coorbit_matrix,
    stacked_coorbit_matrix,
    vectorize,
)
from .errors import (
    SortEmbedError,
    DimensionMismatch,
    ShapeMismatch,
    NonOrthogonalGenerator,
    ClosureCapExceeded,
    EnumerationCapExceeded,
    MTooSmall,
    ConstantVector,
    DegenerateDraw,
    HypothesisViolated,
    AllPairsDegenerate,
    ConfigError,
)
from .group import (
    FiniteGroup,
    GroupElement,
    build_group_from_generators,
    cyclic_group,
    group_stabiliser,
    named_group,
    quotient_dist,
    row_perm_group,
    sign_group,
    trivial_group,
)
from .relu import ReluNet, f_piecewise, paper_counterexample_net, relu_forward
from .signretrieval import (
    MeasurementFrame,
    collision_witness,
    measure,
    mercedes_benz,
    sign_lower_constant,
    sign_upper_constant,
)
from .sorting import (
    check_delta_reexpression,
    check_lemma_conclusions,
    delta,
    diff_minmax,
    enumerate_H,
    enumerate_L,
    generate_lemma_scenario,
    sort_desc,
    sort_profile,
)

__version__ = "0.1.0"
