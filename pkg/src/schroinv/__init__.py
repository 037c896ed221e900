"""Forward simulation and constructive coefficient recovery for a
nonlinear dynamical Schrodinger boundary-value problem on a box."""

from .grid import (
    BoundaryTrace,
    ComplexField,
    SpaceTimeGrid,
    VectorField,
)
from .solver import (
    Carrier,
    NonlinearitySpec,
    PicardDivergence,
    Potential,
    SolverError,
    compute_u2,
    solve_adjoint,
    solve_linear,
    solve_nonlinear,
    solve_source,
)

__version__ = "0.1.0"

from .config import ConfigError, load_config  # noqa: E402
from .epsilon_lab import (  # noqa: E402
    check_remainder_admissibility,
    contraction_study,
    expansion_residual_study,
)
from .fourier import (  # noqa: E402
    FourierSampleSet,
    invert_samples,
    invert_samples_complex,
)
from .measurement import (  # noqa: E402
    DirectQSource,
    ExtractedQSource,
    Measurement,
    apply_io_map,
    extract_linearizations,
    lambda_b,
    lambda_q,
    load_measurement,
    probe_boundary_data,
    save_measurement,
)
from .probes import ProbeSpec  # noqa: E402
from .reconstruct_b import (  # noqa: E402
    DirectBSource,
    PolarizedBSource,
    build_adjoint_probe,
    reconstruct_b_bench,
    run_b_reconstruction,
)
from .reconstruct_q import (  # noqa: E402
    largest_admissible_lambda,
    reconstruct_q_bench,
    run_q_reconstruction,
)
from .srf1 import read_field, write_field  # noqa: E402
from .verify import (  # noqa: E402
    check_b_identity_oracle,
    check_q_identity_oracle,
    run_verify,
)
