"""Local fractal functions: Read-Bajraktarevic fixed points, smoothness conditions,
seminorm estimates and local IFS attractors."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigParseError,
    ConfigurationError,
    ContractionError,
    DomainError,
    LocalFractalError,
    ParameterError,
)
from .geometry import Box, Partition, Piece, Similitude, halving_partition, partition_validate, uniform_partition  # noqa: E402
from .functions import SampledFunction, constant, polynomial  # noqa: E402
from .rb import LocalFractalSystem, RBOperator, evaluate_exact, fixed_point, rb_apply  # noqa: E402
from .conditions import (  # noqa: E402
    SpaceParams,
    SystemSummary,
    check_Lp,
    check_besov,
    check_space,
    check_triebel,
    classical_preset,
    parse_space,
)
from .seminorms import besov_seminorm_estimate, full_norm, triebel_seminorm_estimate  # noqa: E402
from .attractor import floc_apply, hausdorff_distance, iterate_attractor  # noqa: E402
