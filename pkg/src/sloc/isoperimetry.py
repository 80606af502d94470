"""Set masses under localization, boundary measures and Cheeger ratios.

Tracks g(t) = (mass of a test set under the localized density), checks the
explicit variance and quadratic-variation bounds E[(g - 1/2)^2] <= t and
d[g]/dt <= 1, estimates Minkowski boundary measures by epsilon-extension
with Richardson extrapolation, and applies the concentration-to-Cheeger
reduction (1 - 2*lambda)/Theta.
"""

from dataclasses import dataclass, field
from math import erf, sqrt

import numpy as np

from . import bodies
from .engine import run_trajectory
from .measures import QUAD_MAX_DIM, quadrature_grid
from .tilt import GaussianClosedForm, GridQuadrature, ParticleWeights, tilt_exponent


class MassTooLarge(ValueError):
    pass


class EmptyTestSet(ValueError):
    pass


class MiscenteredSet(ValueError):
    pass


class ExtrapolationUnstable(RuntimeError):
    pass


class ConditioningEventEmpty(RuntimeError):
    pass


def _phi(z):
    return 0.5 * (1.0 + erf(z / sqrt(2.0)))


@dataclass(frozen=True)
class TestSet:
    """A measurable set with a deterministic membership function."""

    kind: str  # halfspace | ellipsoid | body | custom-indicator
    params: dict = field(default_factory=dict)

    def membership(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "halfspace":
            return x @ self.params["normal"] <= self.params["offset"]
        if self.kind == "ellipsoid":
            axes = np.asarray(self.params["axes"], dtype=float)
            return np.sum((x / axes) ** 2, axis=-1) <= 1.0
        if self.kind == "body":
            return bodies.contains(self.params["spec"], x)
        if self.kind == "custom-indicator":
            return np.asarray(self.params["indicator"](x), dtype=bool)
        raise ValueError(f"unknown test-set kind {self.kind!r}")

    def distance(self, x):
        """Euclidean distance to the set (0 inside); drives the extensions."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "halfspace":
            d = np.asarray(self.params["normal"], dtype=float)
            return np.maximum(x @ d - self.params["offset"], 0.0) / np.linalg.norm(d)
        if self.kind == "ellipsoid":
            spec = bodies.BodySpec("ellipsoid", x.shape[1], {"axes": self.params["axes"]})
            return bodies.distance(spec, x)
        if self.kind == "body":
            return bodies.distance(self.params["spec"], x)
        raise ValueError(f"no distance function for kind {self.kind!r}")


def halfspace(normal, offset):
    normal = np.asarray(normal, dtype=float)
    if np.linalg.norm(normal) == 0:
        raise EmptyTestSet("halfspace normal must be nonzero")
    return TestSet("halfspace", {"normal": normal, "offset": float(offset)})


def whole_space(n):
    return TestSet("custom-indicator", {"indicator": lambda x: np.ones(len(np.atleast_2d(x)), bool)})


@dataclass
class MassProcess:
    t: np.ndarray
    g: np.ndarray

    def qv(self):
        """Realized quadratic variation, cumulative from increments."""
        return np.concatenate([[0.0], np.cumsum(np.diff(self.g) ** 2)])

    def qv_rate(self, window=0.1):
        """Average QV per unit time over sliding windows of given width."""
        t, q = self.t, self.qv()
        rates = []
        for i in range(len(t)):
            j = np.searchsorted(t, t[i] + window)
            if j >= len(t):
                break
            rates.append((q[j] - q[i]) / (t[j] - t[i]))
        return np.array(rates)


# ---------------------------------------------------------------------------
# static masses


def _split_grid(f, E, order=64):
    """Quadrature grid with a cell edge on an axis-aligned halfspace cut.

    Aligning a cell boundary with the cut keeps the indicator exact; other
    set kinds fall back to plain masking (reduced accuracy, noted by caller).
    """
    box = np.array(f.box, dtype=float, copy=True)
    if E is not None and E.kind == "halfspace":
        d = E.params["normal"]
        axis = int(np.argmax(np.abs(d)))
        if np.allclose(np.abs(d), np.abs(d[axis]) * (np.arange(len(d)) == axis)):
            cut = E.params["offset"] / d[axis]
            lo, hi = box[axis]
            if lo < cut < hi:
                pts1, w1 = quadrature_grid(
                    np.vstack([box[:axis], [[lo, cut]], box[axis + 1:]]), order
                )
                pts2, w2 = quadrature_grid(
                    np.vstack([box[:axis], [[cut, hi]], box[axis + 1:]]), order
                )
                return np.concatenate([pts1, pts2]), np.concatenate([w1, w2])
    return quadrature_grid(box, order)


def set_mass(f, E, rng=None, n_samples=400_000, order=64):
    """mu(E) for the base density: quadrature (n <= 3) or Monte Carlo."""
    if f.dim <= QUAD_MAX_DIM:
        pts, w = _split_grid(f, E, order)
        vals = w * np.exp(f.log_eval(pts))
        return float(vals[E.membership(pts)].sum() / vals.sum())
    if f.sampler is None:
        raise ValueError("Monte Carlo mass needs a sampler")
    rng = rng if rng is not None else np.random.default_rng(0)
    return float(np.mean(E.membership(f.sampler(rng, n_samples))))


def halfspace_bisection(f, normal, target=0.5, iters=40, tol=0.01):
    """Offset o with mu{<normal, x> <= o} = target, by bisection."""
    normal = np.asarray(normal, dtype=float)
    r = f.support_radius * float(np.linalg.norm(normal))
    lo, hi = -r, r
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if set_mass(f, halfspace(normal, mid)) < target:
            lo = mid
        else:
            hi = mid
    o = 0.5 * (lo + hi)
    got = set_mass(f, halfspace(normal, o))
    if abs(got - target) > tol:
        raise MiscenteredSet(f"bisection reached mass {got:.4f}, target {target}")
    return o


# ---------------------------------------------------------------------------
# mass processes along localization runs


def mass_observer(E, f=None):
    """Observer recording g(t) at each step; returns (callback, sink list).

    Cloud runs use indicator-weighted particle mass; tilt-path runs use the
    Gaussian closed form for halfspaces when available, and a masked
    quadrature of the tilted density otherwise.
    """
    sink = []

    def cb(rec, cloud):
        if cloud is not None:
            wp, _ = cloud.measure()
            wn = wp.normalized()
            g = float(wn[E.membership(wp.points)].sum())
        elif (
            f is not None
            and f.gaussian_tilt_oracle is not None
            and E.kind == "halfspace"
        ):
            d = E.params["normal"]
            scale = float(np.linalg.norm(d))
            mu = float(d @ rec.a) / scale
            sd = sqrt(float(d @ rec.A @ d)) / scale
            g = _phi((E.params["offset"] / scale - mu) / sd)
        elif f is not None and f.dim <= QUAD_MAX_DIM:
            pts, w = _split_grid(f, E)
            e = tilt_exponent(f, _state_of(rec), pts)
            m0 = float(np.max(e[np.isfinite(e)]))
            q = np.where(np.isfinite(e), w * np.exp(e - m0), 0.0)
            g = float(q[E.membership(pts)].sum() / q.sum())
        else:
            raise ValueError("cannot evaluate set mass for this run type")
        sink.append((rec.t, g))

    return cb, sink


def _state_of(rec):
    from .tilt import TiltState

    return TiltState(c=rec.c, B=rec.B, t=rec.t)


def run_mass_process(f, E, schedule, strategy, seed):
    """One localization run with the set-mass observer attached."""
    cb, sink = mass_observer(E, f=f)
    run_trajectory(f, schedule, strategy, seed, observers=(cb,))
    arr = np.array(sink)
    return MassProcess(t=arr[:, 0], g=arr[:, 1])


def variance_bound_check(processes, slack=0.05, window=0.1, start_tol=0.01):
    """Explicit variance and QV-rate bounds for sets starting at mass 1/2.

    Across-run mean of (g(t) - 1/2)^2 must stay below (1 + slack) * t, and
    per-run windowed QV rates below 1 + slack on average; both constants
    are exactly 1 in continuous time.
    """
    g0 = np.array([p.g[0] for p in processes])
    # per-run g(0) carries binomial noise on cloud runs; judge the mean
    start_dev = abs(float(g0.mean()) - 0.5)
    start_err = float(g0.std(ddof=1) / sqrt(len(g0))) if len(g0) > 1 else 0.0
    if start_dev > max(start_tol, 3.0 * start_err):
        raise MiscenteredSet("variance bound requires g(0) = 1/2 within tolerance")
    t = processes[0].t
    k = min(len(p.t) for p in processes)
    gs = np.array([p.g[:k] for p in processes])
    msd = np.mean((gs - 0.5) ** 2, axis=0)
    # the t=0 mean square is pure evaluation noise (binomial on cloud runs)
    # and rides on top of the true variance at every later time
    var_ok = np.all(msd <= (1.0 + slack) * t[:k] + msd[0] + 1e-12)
    rates = [p.qv_rate(window) for p in processes]
    mean_rate = float(np.mean([r.mean() for r in rates if len(r)]))
    qv_ok = mean_rate <= 1.0 + slack
    mean_g = gs.mean(axis=0)
    stderr_g = gs.std(axis=0, ddof=1) / sqrt(len(processes))
    mart_ok = np.all(np.abs(mean_g - mean_g[0]) <= 3.0 * stderr_g + 1e-9)
    band = np.mean((gs >= 0.1) & (gs <= 0.9), axis=0)
    return {
        "t": t[:k],
        "mean_sq_dev": msd,
        "variance_bound_pass": bool(var_ok),
        "mean_qv_rate": mean_rate,
        "qv_rate_pass": bool(qv_ok),
        "martingale_pass": bool(mart_ok),
        "band_frequency": band,
        "pass": bool(var_ok and qv_ok),
    }


def band_frequency_check(processes, t_max=0.05):
    """P(0.1 <= g <= 0.9) > 1/2 at small times (Chebyshev with E[(g-1/2)^2] <= t)."""
    t = processes[0].t
    k = min(len(p.t) for p in processes)
    gs = np.array([p.g[:k] for p in processes])
    sel = t[:k] <= t_max
    freq = np.mean((gs[:, sel] >= 0.1) & (gs[:, sel] <= 0.9), axis=0)
    return {"t": t[:k][sel], "frequency": freq, "pass": bool(np.all(freq > 0.5))}


# ---------------------------------------------------------------------------
# boundary measure, Cheeger ratio, Milman reduction


def extension_mass(f, A, eps, rng=None, n_samples=400_000, order=64):
    """mu(A_eps): mass of the eps-extension {dist(x, A) <= eps}."""
    if A.kind == "halfspace":
        d = A.params["normal"]
        shifted = halfspace(d, A.params["offset"] + eps * float(np.linalg.norm(d)))
        return set_mass(f, shifted, rng=rng, n_samples=n_samples, order=order)
    if f.dim <= QUAD_MAX_DIM:
        pts, w = _split_grid(f, None, order)
        vals = w * np.exp(f.log_eval(pts))
        inside = A.distance(pts) <= eps
        return float(vals[inside].sum() / vals.sum())
    rng = rng if rng is not None else np.random.default_rng(0)
    x = f.sampler(rng, n_samples)
    return float(np.mean(A.distance(x) <= eps))


def boundary_measure(
    f, A, eps_ladder=(0.1, 0.05, 0.025, 0.0125), rng=None, monotone_tol=0.05
):
    """Minkowski boundary measure via the eps-extension difference quotient.

    Computes (mu(A_eps) - mu(A))/eps down the ladder and Richardson-
    extrapolates the two smallest eps (the quotient is mu+ + c*eps + ...).
    """
    eps_ladder = sorted(eps_ladder, reverse=True)
    base = set_mass(f, A, rng=rng)
    quots = np.array(
        [(extension_mass(f, A, e, rng=rng) - base) / e for e in eps_ladder]
    )
    diffs = np.diff(quots)
    if np.any(np.abs(diffs) > monotone_tol * (1.0 + np.abs(quots[:-1]))) and not (
        np.all(diffs <= monotone_tol) or np.all(diffs >= -monotone_tol)
    ):
        raise ExtrapolationUnstable("difference quotients oscillate beyond tolerance")
    # ladder halves eps each rung: 2 q(eps) - q(2 eps) cancels the O(eps) term
    return float(2.0 * quots[-1] - quots[-2])


def cheeger_ratio(f, A, rng=None, **kw):
    """mu+(A) / mu(A), defined for sets of mass in (0, 1/2]."""
    mass = set_mass(f, A, rng=rng)
    if mass <= 0.0:
        raise EmptyTestSet("Cheeger ratio undefined for null sets")
    if mass > 0.5 + 1e-9:
        raise MassTooLarge(f"set mass {mass:.4f} exceeds 1/2")
    return boundary_measure(f, A, rng=rng, **kw) / mass


def milman_reduction(lam, theta):
    """Concentration profile (lambda, Theta) to a Cheeger lower bound."""
    if not 0.0 < lam < 0.5:
        raise ValueError("lambda must lie in (0, 1/2)")
    if theta <= 0:
        raise ValueError("Theta must be positive")
    return (1.0 - 2.0 * lam) / theta


def extension_mass_probe(
    f, E, schedule, strategy, seeds, r_ladder, capture_target=0.05
):
    """Localized mass captured by set extensions, after the set stays balanced.

    For each run, at the final recorded time, conditions on 0.1 <= g <= 0.9
    and measures the extra mass in E_r \\ E per extension radius r; asserts
    monotonicity in r and reports the smallest radius capturing
    `capture_target`.
    """
    r_ladder = sorted(r_ladder)
    captured = {r: [] for r in r_ladder}
    residual = []
    for seed in seeds:
        cb, sink = mass_observer(E, f=f)
        extra_sinks = {r: [] for r in r_ladder}

        def cb_ext(rec, cloud, sinks=extra_sinks):
            for r, dest in sinks.items():
                dest.append(_extension_extra_mass(f, E, r, rec, cloud))

        run_trajectory(f, schedule, strategy, seed, observers=(cb, cb_ext))
        g_end = sink[-1][1]
        if not 0.1 <= g_end <= 0.9:
            continue
        residual.append(1.0 - g_end)
        for r in r_ladder:
            captured[r].append(extra_sinks[r][-1])
    if not residual:
        raise ConditioningEventEmpty("no run ended with g in [0.1, 0.9]")
    means = {r: float(np.mean(v)) for r, v in captured.items()}
    vals = [means[r] for r in r_ladder]
    monotone = bool(np.all(np.diff(vals) >= -1e-9))
    smallest = next((r for r in r_ladder if means[r] >= capture_target), None)
    return {
        "r_ladder": r_ladder,
        "captured_mass": means,
        "monotone": monotone,
        "smallest_capturing_radius": smallest,
        "mean_residual_mass": float(np.mean(residual)),
        "n_conditioned": len(residual),
    }


def _extension_extra_mass(f, E, r, rec, cloud):
    """Mass of E_r \\ E under the localized density at one record."""
    if cloud is not None:
        wp, _ = cloud.measure()
        wn = wp.normalized()
        d = E.distance(wp.points)
        return float(wn[(d > 0) & (d <= r)].sum())
    if f.gaussian_tilt_oracle is not None and E.kind == "halfspace":
        dvec = E.params["normal"]
        scale = float(np.linalg.norm(dvec))
        mu = float(dvec @ rec.a) / scale
        sd = sqrt(float(dvec @ rec.A @ dvec)) / scale
        o = E.params["offset"] / scale
        return _phi((o + r - mu) / sd) - _phi((o - mu) / sd)
    raise ValueError("extension probe needs a cloud run or Gaussian halfspace")
