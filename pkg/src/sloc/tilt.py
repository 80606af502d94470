"""Moments of exponentially tilted measures.

The tilted measure attached to a state (c, B) has density proportional to
exp(<c, x> - 0.5 <Bx, x>) f(x).  Three interchangeable strategies compute its
mass, barycenter and covariance: the Gaussian closed form, tensorized
Gauss-Legendre quadrature (n <= 3), and weighted particle clouds.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    CovarianceFloorBreach,
    check_floor,
    sym_eig,
    symmetrize,
)
from .measures import DEFAULT_QUAD_ORDER, quadrature_grid


class StrategyMismatch(ValueError):
    pass


@dataclass
class TiltState:
    """Exponential tilt parameters (c, B) at process time t."""

    c: np.ndarray
    B: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, n):
        return cls(c=np.zeros(n), B=np.zeros((n, n)), t=0.0)

    def validate(self):
        b = np.asarray(self.B)
        if not np.allclose(b, b.T, atol=1e-10):
            raise ValueError("B must be symmetric within 1e-10")
        if np.min(np.linalg.eigvalsh(symmetrize(b))) < -1e-10:
            raise ValueError("B must be positive semi-definite")
        if self.t < 0:
            raise ValueError("t must be non-negative")


@dataclass
class TiltedMoments:
    """Mass V, barycenter a and covariance A of a tilted measure."""

    V: float
    a: np.ndarray
    A: np.ndarray
    n_eff: float = np.inf


@dataclass
class WeightedPoints:
    """A discrete measure: points with nonnegative weights.

    Realizes both quadrature grids (points = nodes, weights = w * f) and
    particle clouds (weights = importance weights / N).  Weights need not be
    normalized; `total` is their sum.
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def total(self):
        return float(self.weights.sum())

    def normalized(self):
        return self.weights / self.total

    def mean(self):
        return self.normalized() @ self.points

    def moments(self, bessel=False):
        """(V, a, A) of the discrete measure.

        With bessel=True the covariance carries the reliability-weight
        correction 1/(1 - sum w_i^2), removing the leading finite-sample
        bias of weighted covariances.
        """
        wn = self.normalized()
        a = wn @ self.points
        d = self.points - a
        cov = (wn[:, None] * d).T @ d
        ess = 1.0 / float(np.sum(wn**2))
        if bessel:
            corr = 1.0 - float(np.sum(wn**2))
            if corr > 0:
                cov = cov / corr
        return TiltedMoments(V=self.total, a=a, A=symmetrize(cov), n_eff=ess)


# ---------------------------------------------------------------------------
# strategies


@dataclass
class GaussianClosedForm:
    """Valid only for standard-gaussian densities; A = (B + I)^{-1} exactly."""

    kind: str = "closed-form-gaussian"


@dataclass
class GridQuadrature:
    """Tensor Gauss-Legendre on the support box, n <= 3.

    When `adaptive_window` is set, the integration box tracks the tilted
    measure (center `window_center`, half-width window_sigmas * std per axis)
    so that sharply localized tilts stay resolved late in a trajectory.
    """

    order: int = DEFAULT_QUAD_ORDER
    adaptive_window: bool = True
    window_sigmas: float = 12.0
    floor_rel: float = 1e-12
    # mutable window state, updated by callers holding current moments
    window_center: np.ndarray = None
    window_scale: np.ndarray = None

    def box_for(self, f):
        box = np.array(f.box, dtype=float, copy=True)
        if self.adaptive_window and self.window_center is not None:
            lo = self.window_center - self.window_sigmas * self.window_scale
            hi = self.window_center + self.window_sigmas * self.window_scale
            box[:, 0] = np.maximum(box[:, 0], lo)
            box[:, 1] = np.minimum(box[:, 1], hi)
            bad = box[:, 1] <= box[:, 0]
            box[bad] = f.box[bad]
        return box

    def update_window(self, moments):
        self.window_center = np.array(moments.a, copy=True)
        self.window_scale = np.sqrt(np.maximum(np.diag(moments.A), 1e-30))


@dataclass
class ParticleWeights:
    """Moments from a fixed particle cloud with evolving log-weights."""

    n_particles: int = 10_000
    min_ess: float = 50.0
    bessel: bool = True


def tilt_exponent(f, state, x):
    """log of the unnormalized tilted density at points x."""
    c, b = np.asarray(state.c, dtype=float), symmetrize(state.B)
    quad = 0.5 * np.einsum("pi,ij,pj->p", x, b, x)
    return x @ c - quad + f.log_eval(x)


def tilted_moments(f, state, strategy):
    """Mass, barycenter and covariance of e^{<c,x> - .5<Bx,x>} f(x) dx."""
    if isinstance(strategy, GaussianClosedForm):
        if f.gaussian_tilt_oracle is None:
            raise StrategyMismatch(
                "closed-form-gaussian requires a standard-gaussian density"
            )
        m = f.gaussian_tilt_oracle(np.asarray(state.c, dtype=float), state.B)
        _check_moment_floor(m, 1e-12)
        return m
    if isinstance(strategy, GridQuadrature):
        pts, w = quadrature_grid(strategy.box_for(f), strategy.order)
        e = tilt_exponent(f, state, pts)
        finite = np.isfinite(e)
        if not np.any(finite):
            raise CovarianceFloorBreach("tilted measure has no mass on the grid")
        # max-subtraction keeps the exponentiation in range for large tilts
        m0 = float(np.max(e[finite]))
        q = np.where(finite, w * np.exp(e - m0), 0.0)
        wp = WeightedPoints(points=pts, weights=q)
        m = wp.moments()
        m.V = wp.total * np.exp(m0)
        m.n_eff = np.inf
        _check_moment_floor(m, strategy.floor_rel)
        strategy.update_window(m)
        return m
    raise StrategyMismatch(f"unsupported strategy {strategy!r}")


def _check_moment_floor(m, floor_rel):
    vals = np.linalg.eigvalsh(symmetrize(m.A))
    check_floor(vals, floor_rel)


def conditional_density_form(f, state, strategy=None):
    """The normalized tilted density f_t = V^{-1} e^{<c,x>-.5<Bx,x>} f(x)."""
    from .measures import LogDensity

    if strategy is None:
        strategy = (
            GaussianClosedForm()
            if f.gaussian_tilt_oracle is not None
            else GridQuadrature()
        )
    m = tilted_moments(f, state, strategy)
    log_v = np.log(m.V)
    c = np.array(state.c, dtype=float, copy=True)
    b = symmetrize(state.B)

    def log_eval(x, f=f, c=c, b=b, log_v=log_v):
        quad = 0.5 * np.einsum("pi,ij,pj->p", x, b, x)
        return x @ c - quad + f.log_eval(x) - log_v

    return LogDensity(
        kind="custom",
        dim=f.dim,
        log_eval=log_eval,
        support_radius=f.support_radius,
        box=f.box,
        meta={"tilted_from": f.kind, "moments": m},
    )


def quadrature_measure(f, order=DEFAULT_QUAD_ORDER, box=None):
    """WeightedPoints representation of the density itself (n <= 3)."""
    pts, w = quadrature_grid(f.box if box is None else box, order)
    vals = np.exp(f.log_eval(pts))
    return WeightedPoints(points=pts, weights=w * vals)


def whitened(wp, a, A):
    """Push a weighted point set through y = A^{-1/2}(x - a)."""
    vals, vecs = sym_eig(A)
    check_floor(vals)
    root_inv = (vecs / np.sqrt(vals)) @ vecs.T
    return WeightedPoints(points=(wp.points - a) @ root_inv.T, weights=wp.weights)
