"""Discrete spectrum of non-local lattice Schroedinger operators Psi(L) + v delta_0."""

__version__ = "0.1.0"

from .multiplier import (  # noqa: E402
    DiscreteBernstein,
    EdgeExponents,
    Fractional,
    GeometricStable,
    HigherOrder,
    Identity,
    InvalidSpecError,
    JumpDiffusion,
    MultiplierSpec,
    Relativistic,
    SpectralWindow,
    catalogue,
    edge_exponents,
    estimate_edge_exponents,
    eval_psi,
    spec_from_dict,
    spectral_window,
)
from .oracle import convergence_study, dense_check, secular_eigenvalue  # noqa: E402
from .spectral import (  # noqa: E402
    Behavior,
    classify_edge,
    coupling_for_energy,
    eigencurve,
    eigenvector_profile,
    energy_for_coupling,
    is_eigenvalue,
    thresholds,
)
from .torus_quadrature import (  # noqa: E402
    IntegralEstimate,
    QuadratureOptions,
    TorusDomain,
    integral_I,
    integral_J,
    integral_log_offset,
    integral_offset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
