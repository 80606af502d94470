"""Log-concave probability densities and their moment oracles.

A `LogDensity` bundles a vectorized log-density evaluator with its support
geometry, an optional exact sampler, and (for the Gaussian) a closed-form
oracle for moments under exponential tilts.  Unbounded builtins are
hard-truncated at radius max(n, 10*sqrt(n)) and renormalized so that every
tilted integral in the pipeline is finite.
"""

from dataclasses import dataclass, field, replace
from math import log, pi, sqrt, exp

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import bodies
from .linalg import sym_eig, sym_inv_sqrt, sym_sqrt, symmetrize

DEFAULT_QUAD_ORDER = 64
QUAD_MAX_DIM = 3


class QuadratureDimensionTooHigh(ValueError):
    pass


class SingularCovariance(ValueError):
    pass


def truncation_radius(n):
    return max(float(n), 10.0 * sqrt(n))


@dataclass
class MomentSummary:
    mass: float
    barycenter: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class LogDensity:
    """A log-concave density with explicit support information.

    log_eval maps a (P, n) array to (P,) log-density values, -inf outside
    the support.  `box` is an (n, 2) array bounding the support; `sampler`,
    when present, draws exact samples (rng, size) -> (size, n).
    """

    kind: str
    dim: int
    log_eval: callable
    support_radius: float
    box: np.ndarray
    sampler: callable = None
    gaussian_tilt_oracle: callable = None
    truncated_mass: float = 1.0
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.log_eval(np.atleast_2d(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# builtins


def standard_gaussian(n):
    r = truncation_radius(n)

    def log_eval(x):
        out = -0.5 * np.sum(x * x, axis=-1) - 0.5 * n * log(2 * pi)
        out[np.linalg.norm(x, axis=-1) > r] = -np.inf
        return out

    def sampler(rng, size):
        return rng.normal(size=(size, n))

    def tilt_oracle(c, b):
        from .tilt import TiltedMoments

        prec = symmetrize(b) + np.eye(n)
        cov = np.linalg.inv(prec)
        cov = symmetrize(cov)
        mean = cov @ c
        sign, logdet = np.linalg.slogdet(prec)
        log_v = 0.5 * float(c @ mean) - 0.5 * logdet
        # late in a trajectory the tilted mass grows beyond float range;
        # saturate to inf rather than aborting the run
        with np.errstate(over="ignore"):
            v = float(np.exp(log_v))
        return TiltedMoments(V=v, a=mean, A=cov)

    box = np.column_stack([-r * np.ones(n), r * np.ones(n)])
    return LogDensity(
        kind="standard-gaussian",
        dim=n,
        log_eval=log_eval,
        support_radius=r,
        box=box,
        sampler=sampler,
        gaussian_tilt_oracle=tilt_oracle,
    )


def uniform_body(spec, rng=None):
    """Uniform probability density on a BodySpec body."""
    vol = bodies.volume(spec, rng)
    log_h = -log(vol)
    r = bodies.bounding_radius(spec)

    def log_eval(x, spec=spec, log_h=log_h):
        out = np.full(x.shape[:-1], -np.inf)
        out[bodies.contains(spec, x)] = log_h
        return out

    def sampler(rng, size, spec=spec):
        return bodies.sample(spec, rng, size)

    box = _body_box(spec)
    return LogDensity(
        kind="uniform-body",
        dim=spec.dim,
        log_eval=log_eval,
        support_radius=r,
        box=box,
        sampler=sampler,
        meta={"body": spec, "volume": vol},
    )


def product_exponential(n):
    """Product of n centered exponentials Exp(1) - 1; isotropic.

    Each axis is truncated at the global truncation radius and the 1-d
    normalizer adjusted in closed form.
    """
    r = truncation_radius(n)
    hi = r
    axis_mass = 1.0 - exp(-(hi + 1.0))
    log_norm = log(axis_mass)

    def log_eval(x):
        out = np.where(
            (x >= -1.0) & (x <= hi), -(x + 1.0) - log_norm, -np.inf
        ).sum(axis=-1)
        return out

    def sampler(rng, size):
        x = rng.standard_exponential(size=(size, n)) - 1.0
        bad = np.any(x > hi, axis=1)
        while np.any(bad):
            x[bad] = rng.standard_exponential(size=(int(bad.sum()), n)) - 1.0
            bad = np.any(x > hi, axis=1)
        return x

    box = np.column_stack([-np.ones(n), hi * np.ones(n)])
    return LogDensity(
        kind="product-1d",
        dim=n,
        log_eval=log_eval,
        support_radius=sqrt(n) * max(1.0, hi),
        box=box,
        sampler=sampler,
        truncated_mass=axis_mass**n,
        meta={"family": "centered-exponential"},
    )


def custom_density(log_eval, dim, support_radius, sampler=None, box=None):
    """Wrap a user-supplied log-density; the support radius is mandatory."""
    if box is None:
        box = np.column_stack(
            [-support_radius * np.ones(dim), support_radius * np.ones(dim)]
        )
    return LogDensity(
        kind="custom",
        dim=dim,
        log_eval=log_eval,
        support_radius=float(support_radius),
        box=np.asarray(box, dtype=float),
        sampler=sampler,
    )


def make_density(spec, dim=None):
    """Build a LogDensity from a builtin tag or a BodySpec."""
    if isinstance(spec, bodies.BodySpec):
        return uniform_body(spec)
    if spec == "standard-gaussian":
        return standard_gaussian(dim)
    if spec == "product-exponential":
        return product_exponential(dim)
    raise bodies.InvalidSpec(f"unknown density spec {spec!r}")


def _body_box(spec):
    p, n = spec.params, spec.dim
    if spec.shape in ("cube", "cube-truncated-by-ball"):
        h = 0.5 * p["side"]
        if spec.shape == "cube-truncated-by-ball":
            h = min(h, p["radius"])
        return np.column_stack([-h * np.ones(n), h * np.ones(n)])
    if spec.shape == "ball":
        r = p["radius"]
        return np.column_stack([-r * np.ones(n), r * np.ones(n)])
    if spec.shape == "ellipsoid":
        axes = np.asarray(p["axes"], dtype=float)
        return np.column_stack([-axes, axes])
    if spec.shape == "simplex":
        s = p["side"]
        return np.column_stack([np.zeros(n), s * np.ones(n)])
    if spec.shape == "halfspace-truncation":
        h = 0.5 * p["side"]
        box = np.column_stack([-h * np.ones(n), h * np.ones(n)])
        box[0, 1] = min(h, p["offset"])
        return box
    r = bodies.bounding_radius(spec)
    return np.column_stack([-r * np.ones(n), r * np.ones(n)])


# ---------------------------------------------------------------------------
# quadrature


def quadrature_grid(box, order=DEFAULT_QUAD_ORDER):
    """Tensorized Gauss-Legendre nodes and weights over a box.

    Returns (points (P, n), weights (P,)).  Deterministic; n <= 3 only.
    """
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    if n > QUAD_MAX_DIM:
        raise QuadratureDimensionTooHigh(f"quadrature limited to n <= {QUAD_MAX_DIM}")
    x1, w1 = leggauss(order)
    axes, wts = [], []
    for i in range(n):
        lo, hi = box[i]
        axes.append(0.5 * (hi - lo) * x1 + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w1)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*wts, indexing="ij")
    w = np.ones(pts.shape[0])
    for m in wmesh:
        w = w * m.ravel()
    return pts, w


def quadrature_moments(f, order=DEFAULT_QUAD_ORDER, box=None):
    """Mass, barycenter and covariance of a density by grid quadrature."""
    pts, w = quadrature_grid(f.box if box is None else box, order)
    vals = np.exp(f.log_eval(pts))
    q = w * vals
    mass = float(q.sum())
    if mass <= 0:
        raise ValueError("density is not normalizable on its support box")
    bary = (q @ pts) / mass
    d = pts - bary
    cov = (q[:, None] * d).T @ d / mass
    return MomentSummary(mass=mass, barycenter=bary, covariance=symmetrize(cov))


def exact_moments(f):
    """Moment summary; closed-form for builtins, quadrature fallback (n<=3)."""
    n = f.dim
    if f.kind == "standard-gaussian":
        return MomentSummary(1.0, np.zeros(n), np.eye(n))
    if f.kind == "product-1d" and f.meta.get("family") == "centered-exponential":
        # moments of the hard-truncated, renormalized exponential
        hi = float(f.box[0, 1])
        big_l = hi + 1.0
        z = 1.0 - exp(-big_l)
        m1 = (1.0 - (1.0 + big_l) * exp(-big_l)) / z
        m2 = (2.0 - (big_l**2 + 2 * big_l + 2.0) * exp(-big_l)) / z
        mean = m1 - 1.0
        var = m2 - m1**2
        return MomentSummary(1.0, mean * np.ones(n), var * np.eye(n))
    if f.kind == "uniform-body":
        spec = f.meta["body"]
        p = spec.params
        if spec.shape == "cube":
            return MomentSummary(1.0, np.zeros(n), p["side"] ** 2 / 12.0 * np.eye(n))
        if spec.shape == "ball":
            return MomentSummary(
                1.0, np.zeros(n), p["radius"] ** 2 / (n + 2.0) * np.eye(n)
            )
        if spec.shape == "ellipsoid":
            axes = np.asarray(p["axes"], dtype=float)
            return MomentSummary(1.0, np.zeros(n), np.diag(axes**2 / (n + 2.0)))
        if spec.shape == "simplex":
            s = p["side"]
            denom = (n + 1.0) ** 2 * (n + 2.0)
            cov = -np.ones((n, n)) / denom
            np.fill_diagonal(cov, n / denom)
            return MomentSummary(1.0, s / (n + 1.0) * np.ones(n), s**2 * cov)
    if n <= QUAD_MAX_DIM:
        return quadrature_moments(f)
    if f.sampler is not None:
        rng = np.random.default_rng(0)
        x = f.sampler(rng, 1_000_000)
        return MomentSummary(
            1.0, x.mean(axis=0), symmetrize(np.cov(x, rowvar=False))
        )
    raise QuadratureDimensionTooHigh(
        "no closed form, no sampler, and dimension too high for quadrature"
    )


# ---------------------------------------------------------------------------
# isotropization


@dataclass(frozen=True)
class AffineMap:
    """x -> W (x - shift)."""

    weight: np.ndarray
    shift: np.ndarray

    def __call__(self, x):
        return (np.asarray(x, dtype=float) - self.shift) @ self.weight.T

    def inverse(self, y):
        w_inv = np.linalg.inv(self.weight)
        return np.asarray(y, dtype=float) @ w_inv.T + self.shift


def isotropize(f, moments=None):
    """Whitening transform: returns (isotropic density, affine map).

    The map is x -> Sigma^{-1/2} (x - b).  Raises SingularCovariance when the
    covariance has a near-zero eigenvalue.
    """
    if moments is None:
        moments = exact_moments(f)
    cov = symmetrize(moments.covariance)
    vals, _ = sym_eig(cov)
    if np.min(vals) < 1e-10 * max(np.max(vals), 1.0):
        raise SingularCovariance(f"covariance eigenvalues {vals}")
    w = sym_inv_sqrt(cov)
    amap = AffineMap(weight=w, shift=np.asarray(moments.barycenter, dtype=float))
    root = sym_sqrt(cov)
    sign, logdet = np.linalg.slogdet(cov)
    half_logdet = 0.5 * logdet

    def log_eval(y, f=f, root=root, shift=amap.shift, c=half_logdet):
        return f.log_eval(y @ root.T + shift) + c

    sampler = None
    if f.sampler is not None:

        def sampler(rng, size, f=f, amap=amap):
            return amap(f.sampler(rng, size))

    opnorm_w = float(np.max(np.abs(np.linalg.eigvalsh(w))))
    radius = opnorm_w * (f.support_radius + float(np.linalg.norm(amap.shift)))
    if np.allclose(w, np.diag(np.diag(w))):
        box = (f.box - amap.shift[:, None]) * np.diag(w)[:, None]
    else:
        box = np.column_stack([-radius * np.ones(f.dim), radius * np.ones(f.dim)])
    meta = dict(f.meta, isotropized_from=f.kind)
    if "body" in meta:
        scaled = _rescale_body(meta["body"], w, amap.shift)
        if scaled is None:
            # the affine image is no longer one of the catalogued shapes
            del meta["body"]
            meta.pop("volume", None)
        else:
            meta["body"] = scaled
            meta["volume"] = bodies.volume(scaled)
    g = LogDensity(
        kind=f.kind if f.kind != "standard-gaussian" else "custom",
        dim=f.dim,
        log_eval=log_eval,
        support_radius=radius,
        box=box,
        sampler=sampler,
        truncated_mass=f.truncated_mass,
        meta=meta,
    )
    if f.kind == "standard-gaussian":
        g = replace(g, kind="standard-gaussian", gaussian_tilt_oracle=f.gaussian_tilt_oracle)
    return g, amap


def _rescale_body(spec, w, shift):
    """Image of a catalogued body under x -> w(x - shift), when catalogued.

    Covers centered bodies under scalar scaling (cube, ball, ellipsoid) and
    diagonal scaling of balls/ellipsoids (which stay ellipsoids).  Returns
    None when the image leaves the catalogue.
    """
    if np.linalg.norm(shift) > 1e-9 or not np.allclose(w, np.diag(np.diag(w))):
        return None
    d = np.diag(w)
    scalar = np.allclose(d, d[0])
    p = dict(spec.params)
    if scalar and "side" in p:
        p["side"] = p["side"] * float(d[0])
        if "radius" in p:
            p["radius"] = p["radius"] * float(d[0])
        return bodies.BodySpec(spec.shape, spec.dim, p)
    if spec.shape == "ball":
        axes = p["radius"] * d
        if scalar:
            return bodies.BodySpec("ball", spec.dim, {"radius": float(axes[0])})
        return bodies.BodySpec("ellipsoid", spec.dim, {"axes": axes.tolist()})
    if spec.shape == "ellipsoid":
        axes = np.asarray(p["axes"], dtype=float) * d
        return bodies.BodySpec("ellipsoid", spec.dim, {"axes": axes.tolist()})
    return None


def isotropic_battery(n, include_ball=True):
    """The standard test densities, already isotropic."""
    out = {"gaussian": standard_gaussian(n)}
    cube = uniform_body(bodies.BodySpec("cube", n, {"side": sqrt(12.0)}))
    out["cube"] = cube
    out["exponential"] = product_exponential(n)
    if include_ball:
        ball = uniform_body(bodies.BodySpec("ball", n, {"radius": sqrt(n + 2.0)}))
        out["ball"] = ball
    return out


def logconcavity_spot_check(f, rng, n_triples=1000, tol=1e-9):
    """Statistical log-concavity check on random in-support segments.

    Returns the worst violation of
    log f(lam x + (1-lam) y) >= lam log f(x) + (1-lam) log f(y) - tol
    over the sampled triples (negative or ~0 means no violation).
    """
    if f.sampler is not None:
        x = f.sampler(rng, n_triples)
        y = f.sampler(rng, n_triples)
    else:
        lo, hi = f.box[:, 0], f.box[:, 1]
        x = rng.uniform(lo, hi, size=(n_triples, f.dim))
        y = rng.uniform(lo, hi, size=(n_triples, f.dim))
    lam = rng.uniform(0.05, 0.95, size=n_triples)
    fx, fy = f.log_eval(x), f.log_eval(y)
    mid = f.log_eval(lam[:, None] * x + (1 - lam[:, None]) * y)
    rhs = lam * fx + (1 - lam) * fy
    finite = np.isfinite(rhs)
    if not np.any(finite):
        return -np.inf
    return float(np.max(rhs[finite] - mid[finite]) - tol)
