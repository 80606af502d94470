"""Convex test bodies: membership, volume, sampling and distance.

Conventions: cubes, balls and ellipsoids are centered at the origin; the
simplex is {x_i >= 0, sum x_i <= side}. ``cube-truncated-by-ball`` is the
centered cube intersected with a centered ball, ``halfspace-truncation`` the
centered cube intersected with {x_1 <= offset}.
"""

from dataclasses import dataclass, field
from math import gamma, pi, sqrt, factorial

import numpy as np
from scipy.optimize import minimize


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class BodySpec:
    shape: str
    dim: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidSpec("dimension must be >= 1")
        if self.shape not in _SHAPES:
            raise InvalidSpec(f"unknown shape {self.shape!r}")
        _SHAPES[self.shape].validate(self)


def ball_volume(n, r):
    return pi ** (n / 2.0) / gamma(n / 2.0 + 1.0) * r**n


def unit_volume_ball_radius(n):
    """Radius making the n-ball have volume one (n=2: 1/sqrt(pi))."""
    return (gamma(n / 2.0 + 1.0) / pi ** (n / 2.0)) ** (1.0 / n)


class _Cube:
    @staticmethod
    def validate(spec):
        if spec.params.get("side", 0) <= 0:
            raise InvalidSpec("cube needs positive side")

    @staticmethod
    def contains(spec, x):
        h = 0.5 * spec.params["side"]
        return np.all(np.abs(x) <= h, axis=-1)

    @staticmethod
    def volume(spec, rng=None):
        return spec.params["side"] ** spec.dim

    @staticmethod
    def sample(spec, rng, size):
        h = 0.5 * spec.params["side"]
        return rng.uniform(-h, h, size=(size, spec.dim))

    @staticmethod
    def bounding_radius(spec):
        return 0.5 * spec.params["side"] * sqrt(spec.dim)

    @staticmethod
    def distance(spec, x):
        h = 0.5 * spec.params["side"]
        p = np.clip(x, -h, h)
        return np.linalg.norm(x - p, axis=-1)


class _Ball:
    @staticmethod
    def validate(spec):
        if spec.params.get("radius", 0) <= 0:
            raise InvalidSpec("ball needs positive radius")

    @staticmethod
    def contains(spec, x):
        return np.linalg.norm(x, axis=-1) <= spec.params["radius"]

    @staticmethod
    def volume(spec, rng=None):
        return ball_volume(spec.dim, spec.params["radius"])

    @staticmethod
    def sample(spec, rng, size):
        n = spec.dim
        z = rng.normal(size=(size, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = spec.params["radius"] * rng.uniform(size=(size, 1)) ** (1.0 / n)
        return z * r

    @staticmethod
    def bounding_radius(spec):
        return spec.params["radius"]

    @staticmethod
    def distance(spec, x):
        return np.maximum(np.linalg.norm(x, axis=-1) - spec.params["radius"], 0.0)


class _Simplex:
    @staticmethod
    def validate(spec):
        if spec.params.get("side", 0) <= 0:
            raise InvalidSpec("simplex needs positive side")

    @staticmethod
    def contains(spec, x):
        s = spec.params["side"]
        return np.all(x >= 0, axis=-1) & (np.sum(x, axis=-1) <= s)

    @staticmethod
    def volume(spec, rng=None):
        return spec.params["side"] ** spec.dim / factorial(spec.dim)

    @staticmethod
    def sample(spec, rng, size):
        # uniform via sorted-uniform spacings
        n = spec.dim
        u = np.sort(rng.uniform(size=(size, n)), axis=1)
        u = np.concatenate([np.zeros((size, 1)), u], axis=1)
        return np.diff(u, axis=1) * spec.params["side"]

    @staticmethod
    def bounding_radius(spec):
        return spec.params["side"]

    @staticmethod
    def distance(spec, x):
        return _qp_distance(spec, x)


class _Ellipsoid:
    @staticmethod
    def validate(spec):
        axes = np.asarray(spec.params.get("axes", ()), dtype=float)
        if axes.shape != (spec.dim,) or np.any(axes <= 0):
            raise InvalidSpec("ellipsoid needs one positive semi-axis per dimension")

    @staticmethod
    def contains(spec, x):
        axes = np.asarray(spec.params["axes"], dtype=float)
        return np.sum((x / axes) ** 2, axis=-1) <= 1.0

    @staticmethod
    def volume(spec, rng=None):
        axes = np.asarray(spec.params["axes"], dtype=float)
        return ball_volume(spec.dim, 1.0) * float(np.prod(axes))

    @staticmethod
    def sample(spec, rng, size):
        axes = np.asarray(spec.params["axes"], dtype=float)
        ball = BodySpec("ball", spec.dim, {"radius": 1.0})
        return _Ball.sample(ball, rng, size) * axes

    @staticmethod
    def bounding_radius(spec):
        return float(np.max(spec.params["axes"]))

    @staticmethod
    def distance(spec, x):
        return _qp_distance(spec, x)


class _CubeTruncatedByBall:
    @staticmethod
    def validate(spec):
        if spec.params.get("side", 0) <= 0 or spec.params.get("radius", 0) <= 0:
            raise InvalidSpec("cube-truncated-by-ball needs positive side and radius")

    @staticmethod
    def contains(spec, x):
        cube = BodySpec("cube", spec.dim, {"side": spec.params["side"]})
        ball = BodySpec("ball", spec.dim, {"radius": spec.params["radius"]})
        return _Cube.contains(cube, x) & _Ball.contains(ball, x)

    @staticmethod
    def volume(spec, rng=None):
        return _mc_volume(spec, rng)

    @staticmethod
    def sample(spec, rng, size):
        return _rejection_sample(spec, rng, size)

    @staticmethod
    def bounding_radius(spec):
        return min(0.5 * spec.params["side"] * sqrt(spec.dim), spec.params["radius"])

    @staticmethod
    def distance(spec, x):
        # clamp onto the cube first; fall back to a small QP when that lands
        # outside the ball
        h = 0.5 * spec.params["side"]
        r = spec.params["radius"]
        x = np.atleast_2d(x)
        if r <= h:  # the ball fits inside the cube; the body is the ball
            ball = BodySpec("ball", spec.dim, {"radius": r})
            return _Ball.distance(ball, x)
        p = np.clip(x, -h, h)
        easy = np.linalg.norm(p, axis=1) <= r
        d = np.linalg.norm(x - p, axis=1)
        if not np.all(easy):
            d[~easy] = _qp_distance(spec, x[~easy])
        return d


class _HalfspaceTruncation:
    @staticmethod
    def validate(spec):
        if spec.params.get("side", 0) <= 0:
            raise InvalidSpec("halfspace-truncation needs positive side")
        if "offset" not in spec.params:
            raise InvalidSpec("halfspace-truncation needs an offset")

    @staticmethod
    def contains(spec, x):
        cube = BodySpec("cube", spec.dim, {"side": spec.params["side"]})
        return _Cube.contains(cube, x) & (np.asarray(x)[..., 0] <= spec.params["offset"])

    @staticmethod
    def volume(spec, rng=None):
        s, o = spec.params["side"], spec.params["offset"]
        width = np.clip(o + 0.5 * s, 0.0, s)
        return width * s ** (spec.dim - 1)

    @staticmethod
    def sample(spec, rng, size):
        s, o = spec.params["side"], spec.params["offset"]
        hi = min(o, 0.5 * s)
        x = rng.uniform(-0.5 * s, 0.5 * s, size=(size, spec.dim))
        x[:, 0] = rng.uniform(-0.5 * s, hi, size=size)
        return x

    @staticmethod
    def bounding_radius(spec):
        return 0.5 * spec.params["side"] * sqrt(spec.dim)

    @staticmethod
    def distance(spec, x):
        return _qp_distance(spec, x)


_SHAPES = {
    "cube": _Cube,
    "ball": _Ball,
    "simplex": _Simplex,
    "ellipsoid": _Ellipsoid,
    "cube-truncated-by-ball": _CubeTruncatedByBall,
    "halfspace-truncation": _HalfspaceTruncation,
}


def contains(spec, x):
    return _SHAPES[spec.shape].contains(spec, np.asarray(x, dtype=float))


def volume(spec, rng=None):
    return _SHAPES[spec.shape].volume(spec, rng)


def sample(spec, rng, size):
    return _SHAPES[spec.shape].sample(spec, rng, size)


def bounding_radius(spec):
    return _SHAPES[spec.shape].bounding_radius(spec)


def distance(spec, x):
    """Euclidean distance from points to the body (0 inside)."""
    return _SHAPES[spec.shape].distance(spec, np.asarray(x, dtype=float))


def _mc_volume(spec, rng=None, n_samples=400_000):
    rng = rng if rng is not None else np.random.default_rng(0)
    r = bounding_radius(spec)
    box = BodySpec("cube", spec.dim, {"side": 2.0 * r})
    pts = _Cube.sample(box, rng, n_samples)
    frac = float(np.mean(contains(spec, pts)))
    return frac * (2.0 * r) ** spec.dim


def _rejection_sample(spec, rng, size):
    r = bounding_radius(spec)
    box = BodySpec("cube", spec.dim, {"side": 2.0 * r})
    out = np.empty((0, spec.dim))
    while out.shape[0] < size:
        cand = _Cube.sample(box, rng, 2 * size + 64)
        out = np.concatenate([out, cand[contains(spec, cand)]])
    return out[:size]


def _qp_distance(spec, x):
    """Projection distance onto a convex body via SLSQP; slow-path fallback."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty(x.shape[0])
    cons = _projection_constraints(spec)
    for i, xi in enumerate(x):
        if bool(np.asarray(contains(spec, xi[None, :]))[0]):
            out[i] = 0.0
            continue
        res = minimize(
            lambda y, xi=xi: float(np.sum((y - xi) ** 2)),
            x0=np.clip(xi, -bounding_radius(spec), bounding_radius(spec)),
            jac=lambda y, xi=xi: 2.0 * (y - xi),
            constraints=cons,
            method="SLSQP",
        )
        out[i] = sqrt(max(res.fun, 0.0))
    return out


def _projection_constraints(spec):
    cons = []
    p = spec.params
    if spec.shape in ("cube", "cube-truncated-by-ball", "halfspace-truncation"):
        h = 0.5 * p["side"]
        cons.append({"type": "ineq", "fun": lambda y: h - np.max(np.abs(y))})
    if spec.shape in ("ball", "cube-truncated-by-ball"):
        r = p["radius"]
        cons.append({"type": "ineq", "fun": lambda y: r - np.linalg.norm(y)})
    if spec.shape == "halfspace-truncation":
        cons.append({"type": "ineq", "fun": lambda y: p["offset"] - y[0]})
    if spec.shape == "simplex":
        s = p["side"]
        cons.append({"type": "ineq", "fun": lambda y: np.min(y)})
        cons.append({"type": "ineq", "fun": lambda y: s - np.sum(y)})
    if spec.shape == "ellipsoid":
        axes = np.asarray(p["axes"], dtype=float)
        cons.append({"type": "ineq", "fun": lambda y: 1.0 - np.sum((y / axes) ** 2)})
    return cons
