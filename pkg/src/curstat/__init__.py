"""Nonparametric maximum likelihood for univariate and multivariate current status data."""
from .errors import InvalidInputError, InvalidStateError
from .model import (
    DistributionRepr,
    Observation,
    OrthantRegion,
    ProductLaw,
    cell_probabilities,
    orthant_index,
    orthant_region,
    read_observations_csv,
    write_observations_csv,
)
from .univariate import StepDistribution, cumulative_diagram, gcm_mle
from .npmle import (
    build_partition,
    em_solve,
    em_step,
    fit_npmle,
    log_likelihood,
    membership_matrix,
    merge_equivalent_cells,
    mle_distribution,
    optimality_gap,
    oracle_solve,
)
from .metrics import Integrator, TruthSpec, check_hellinger_l2_bound, hellinger, l2_g0

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = 1
