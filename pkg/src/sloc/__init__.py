"""Stochastic localization laboratory for log-concave measures.

A simulator for the exponential-tilt localization process together with
verification tooling: moment strategies (closed form, quadrature, particle
clouds), spectral diagnostics of the covariance flow, per-measure scalar
statistics, isoperimetric set-mass tracking, and coupled two-measure runs.
"""

__version__ = "0.1.0"

from .bodies import BodySpec, InvalidSpec
from .engine import (
    ParticleCloud,
    Schedule,
    StepRecord,
    Trajectory,
    cross_check_paths,
    run_trajectory,
    write_trajectory_csv,
)
from .measures import (
    LogDensity,
    custom_density,
    exact_moments,
    isotropic_battery,
    isotropize,
    make_density,
    product_exponential,
    standard_gaussian,
    uniform_body,
)
from .tilt import (
    GaussianClosedForm,
    GridQuadrature,
    ParticleWeights,
    TiltState,
    TiltedMoments,
    tilted_moments,
)

__all__ = [
    "BodySpec",
    "GaussianClosedForm",
    "GridQuadrature",
    "InvalidSpec",
    "LogDensity",
    "ParticleCloud",
    "ParticleWeights",
    "Schedule",
    "StepRecord",
    "TiltState",
    "TiltedMoments",
    "Trajectory",
    "cross_check_paths",
    "custom_density",
    "exact_moments",
    "isotropic_battery",
    "isotropize",
    "make_density",
    "product_exponential",
    "run_trajectory",
    "standard_gaussian",
    "tilted_moments",
    "uniform_body",
    "write_trajectory_csv",
    "__version__",
]
