"""Cross-correlations of coupled optical and matter-wave modes.

Analytic stationary correlations of a linear mode system, the joint
counting rate and normalized cross-correlation g2_x(tau) of a matter-wave
and an optical point detector, and an Euler-Maruyama Monte Carlo oracle.
"""

__version__ = "0.1.0"

from .model import Coupling, ModelParams, ModeSystem, build_system, validate
from .spectral import SpectralDecomposition, eigendecompose, propagator
from .correlations import (
    DetectionGeometry,
    G2Trace,
    GateOrder,
    Provenance,
    correlation_kernel,
    counting_probability,
    fourth_order_rate,
    g2_cross,
    stationary_kernel,
    steady_covariance,
    two_time,
)
from .oracle import SimParams, TrajectoryEnsemble, estimate_g2, estimate_two_time, simulate_ensemble
