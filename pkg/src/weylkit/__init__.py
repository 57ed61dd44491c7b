"""Chart-local toolkit for light-cone, Riemann and Weyl compatibility of
projective and conformal structures."""

__version__ = "0.1.0"

from .expr import Chart, ScalarExpr, parse, evaluate, differentiate  # noqa: E402
from .tensor import PointTensor, SymMatrix, contract, invert, max_abs_diff, signature  # noqa: E402
from .geometry import (  # noqa: E402
    MetricSpec,
    OneFormSpec,
    ConnectionSpec,
    LeviCivitaConnection,
    WeylConnection,
    EPSConnection,
    WeylStructure,
    metric_at,
    levi_civita,
    weyl_connection,
    eps_connection,
    nabla_g_residual,
    projective_shift,
    conformal_rescale,
    gauge_transform,
    difference_tensor,
)
from .compat import (  # noqa: E402
    Decomposition,
    CompatReport,
    sample_null_vectors,
    nullcone_residual,
    is_lightcone_compatible,
    extract_phi,
    extract_eta,
    decompose,
    weylize,
    integrability_check,
)
from .geodesic import GeodesicTrace, integrate_geodesic, null_norm_drift, pregeodesic_residual  # noqa: E402
