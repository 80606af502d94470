"""Coupled localization of two densities through shared noise.

Three particle clouds (for f, for g, and for their normalized supremum
convolution h) evolve with the same Brownian increments and the same
f-side whitening matrix.  The gap between the two barycenters satisfies an
exact optional-stopping identity against the integrated mismatch matrix
D = A^{1/2}(I - A^{-1/2} C A^{-1/2}), which this module verifies, along
with the mass-martingale property of the h-cloud and a desk-scale version
of the volume-stability pipeline for convex bodies.
"""

import warnings
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from . import bodies
from .engine import ParticleCloud, brownian_stream, step_weights, weighted_moments
from .linalg import sym_power, symmetrize
from .measures import quadrature_grid


class InsufficientRuns(ValueError):
    pass


class UnsupportedPair(ValueError):
    pass


class AllRunsExcluded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# supremum convolution


@dataclass
class SupConvolution:
    """sup_y sqrt(f(x+y) g(x-y)) with its total mass."""

    value: callable  # x (P, n) -> values (P,)
    total_mass: float
    sampler: callable = None  # samples from the normalized density value/mass
    exact_kind: str = "grid"  # "identical" | "uniform-bodies" | "grid"
    meta: dict = field(default_factory=dict)


def _uniform_pair(f, g):
    if f.kind == "uniform-body" and g.kind == "uniform-body":
        return f.meta["body"], g.meta["body"]
    return None


def _midpoint_membership(k_spec, t_spec):
    """Membership test for (K+T)/2 = K/2 + T/2, for supported pairs.

    Ball pairs reduce to a distance test against the halved partner body;
    a cube against a ball-truncated cube reduces to box-box intersection
    followed by a nearest-point-to-ball test, all closed form.
    """
    if t_spec.shape == "ball":
        r = 0.5 * t_spec.params["radius"]
        half = bodies.BodySpec(
            k_spec.shape, k_spec.dim, _scale_params(k_spec, 0.5)
        )
        return lambda x: bodies.distance(half, x) <= r + 1e-12
    if k_spec.shape == "ball":
        return _midpoint_membership(t_spec, k_spec)
    if k_spec.shape == "cube" and t_spec.shape in ("cube", "cube-truncated-by-ball"):
        # x in (K+T)/2 iff some u in T lies in the box 2x - K; the candidate
        # box is the intersection of that box with T's cube, and T's ball
        # constraint (if any) holds iff the box point nearest the center
        # is inside the ball
        h = 0.5 * k_spec.params["side"]
        ht = 0.5 * t_spec.params["side"]
        r = t_spec.params.get("radius")

        def member(x, h=h, ht=ht, r=r):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            lo = np.maximum(-ht, 2.0 * x - h)
            hi = np.minimum(ht, 2.0 * x + h)
            ok = np.all(lo <= hi + 1e-12, axis=1)
            if r is not None:
                near = np.clip(0.0, lo, hi)
                ok &= np.linalg.norm(near, axis=1) <= r + 1e-12
            return ok

        return member
    if t_spec.shape == "cube" and k_spec.shape == "cube-truncated-by-ball":
        return _midpoint_membership(t_spec, k_spec)
    raise UnsupportedPair(
        f"no exact midpoint-body membership for {k_spec.shape} + {t_spec.shape}"
    )


def _scale_params(spec, factor):
    p = dict(spec.params)
    for key in ("side", "radius"):
        if key in p:
            p[key] *= factor
    if "axes" in p:
        p["axes"] = [factor * a for a in p["axes"]]
    return p


def midpoint_body_volume(k_spec, t_spec, rng=None, n_samples=400_000):
    """Vol((K+T)/2), closed form in 2D for cube-plus-ball, else Monte Carlo."""
    if {k_spec.shape, t_spec.shape} == {"cube", "ball"} and k_spec.dim == 2:
        cube = k_spec if k_spec.shape == "cube" else t_spec
        ball = t_spec if t_spec.shape == "ball" else k_spec
        s = 0.5 * cube.params["side"]
        rho = 0.5 * ball.params["radius"]
        # rounded square: area + perimeter * rho + pi rho^2
        return s**2 + 4.0 * s * rho + np.pi * rho**2
    if k_spec.shape == t_spec.shape and k_spec.params == t_spec.params:
        return bodies.volume(k_spec)
    member = _midpoint_membership(k_spec, t_spec)
    rng = rng if rng is not None else np.random.default_rng(0)
    r = 0.5 * (bodies.bounding_radius(k_spec) + bodies.bounding_radius(t_spec))
    box = bodies.BodySpec("cube", k_spec.dim, {"side": 2.0 * r})
    pts = bodies.sample(box, rng, n_samples)
    return float(np.mean(member(pts))) * (2.0 * r) ** k_spec.dim


def sup_convolution(f, g, y_points=81):
    """H(f, g)(x) = sup_y sqrt(f(x+y) g(x-y)) and its mass K(f, g).

    Identical inputs collapse to the input itself (mass 1); pairs of
    uniform bodies use the exact Minkowski-midpoint body; anything else
    falls back to a grid maximization over y (n <= 2).
    """
    n = f.dim
    if f is g or (f.kind == g.kind and f.kind != "custom" and f.meta == g.meta):
        return SupConvolution(
            value=lambda x: np.exp(f.log_eval(np.atleast_2d(x))),
            total_mass=1.0,
            sampler=f.sampler,
            exact_kind="identical",
        )
    pair = _uniform_pair(f, g)
    if pair is not None:
        k_spec, t_spec = pair
        member = _midpoint_membership(k_spec, t_spec)
        height = 1.0 / sqrt(f.meta["volume"] * g.meta["volume"])
        vol = midpoint_body_volume(k_spec, t_spec)
        rk = 0.5 * (bodies.bounding_radius(k_spec) + bodies.bounding_radius(t_spec))

        def sampler(rng, size, member=member, rk=rk, n=n):
            box = bodies.BodySpec("cube", n, {"side": 2.0 * rk})
            out = np.empty((0, n))
            while out.shape[0] < size:
                cand = bodies.sample(box, rng, 2 * size + 64)
                out = np.concatenate([out, cand[member(cand)]])
            return out[:size]

        return SupConvolution(
            value=lambda x: height * member(np.atleast_2d(x)).astype(float),
            total_mass=height * vol,
            sampler=sampler,
            exact_kind="uniform-bodies",
            meta={"midpoint_volume": vol},
        )
    if n > 2:
        raise UnsupportedPair("grid sup-convolution supported only for n <= 2")
    r = max(f.support_radius, g.support_radius)
    axis = np.linspace(-r, r, y_points)
    ys = (
        axis[:, None]
        if n == 1
        else np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, n)
    )

    def value(x, ys=ys):
        x = np.atleast_2d(x)
        out = np.empty(x.shape[0])
        for i, xi in enumerate(x):
            s = 0.5 * (f.log_eval(xi + ys) + g.log_eval(xi - ys))
            out[i] = np.exp(np.max(s))
        return out

    box = np.array([[-r, r]] * n)
    pts, w = quadrature_grid(box, 64 if n == 1 else 48)
    mass = float(np.sum(w * value(pts)))
    sampler = None
    if n == 1:
        # inverse-CDF sampler on a fine grid, for the coupled h-cloud
        xs = np.linspace(-r, r, 4097)
        dens = value(xs[:, None])
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
        cdf /= cdf[-1]

        def sampler(rng, size, xs=xs, cdf=cdf):
            u = rng.uniform(size=size)
            return np.interp(u, cdf, xs)[:, None]

    return SupConvolution(value=value, total_mass=mass, sampler=sampler, exact_kind="grid")


# ---------------------------------------------------------------------------
# coupled evolution


@dataclass
class CoupledRecord:
    t: float
    a: np.ndarray  # f-side barycenter
    b: np.ndarray  # g-side barycenter
    A: np.ndarray  # f-side covariance (the shared whitening driver)
    C: np.ndarray  # g-side covariance
    S: float  # h-cloud mass (started at K(f, g))
    mass_f: float
    mass_g: float
    d_hs_sq: float  # ||D_t||_HS^2
    int_d_hs_sq: float  # integral of ||D_s||_HS^2 over [0, t]
    gap_sq: float  # |a_t - b_t|^2
    delta: np.ndarray  # eigenvalues of I - A^{-1/2} C A^{-1/2}
    n_eff: tuple = (np.inf, np.inf, np.inf)


@dataclass
class CoupledTrajectory:
    records: list
    rng_seed: int
    k_mass: float  # K(f, g)
    dim: int
    b_path: np.ndarray = None  # (steps+1, n) dense barycenter path of g

    def times(self):
        return np.array([r.t for r in self.records])

    def stack(self, attr):
        return np.array([getattr(r, attr) for r in self.records])


def mismatch_matrix(A, C):
    """D = A^{1/2}(I - A^{-1/2} C A^{-1/2}) and the delta eigenvalues."""
    root = sym_power(A, 0.5)
    root_inv = sym_power(A, -0.5)
    m = symmetrize(np.eye(A.shape[0]) - root_inv @ C @ root_inv)
    return root @ m, np.linalg.eigvalsh(m)


def singular_value_bound_check(A, d_mat, delta, tol=1e-8):
    """||D||_HS^2 <= sum of (sorted) eigenvalues lambda_i(A) * delta_i^2.

    Both spectra are sorted in decreasing order (the trace inequality for
    symmetric matrices); checked deterministically per record.
    """
    lhs = float(np.sum(d_mat * d_mat))
    lam = np.sort(np.linalg.eigvalsh(A))[::-1]
    dsq = np.sort(np.asarray(delta) ** 2)[::-1]
    rhs = float(lam @ dsq)
    return {"lhs": lhs, "rhs": rhs, "pass": lhs <= rhs + tol}


def run_coupled(f, g, schedule, seed, n_particles=5000, h_conv=None, min_ess=50.0):
    """Evolve the f, g and h clouds with shared (dW, A_f^{-1/2}).

    g must be centered; f isotropic (enforced upstream).  Returns the
    coupled trajectory with the optional-stopping bookkeeping filled in.
    """
    schedule.validate()
    n = f.dim
    if h_conv is None:
        h_conv = sup_convolution(f, g)
    if h_conv.sampler is None:
        raise UnsupportedPair("coupled run needs a sampler for the h-cloud")
    init_rng, noise_rng = brownian_stream(seed)
    pts_f = f.sampler(init_rng, n_particles)
    if h_conv.exact_kind == "identical":
        # f and g are the same measure: share the particles so the two
        # sides cancel exactly, step by step
        pts_g, pts_h = pts_f, pts_f
    else:
        pts_g = g.sampler(init_rng, n_particles)
        pts_h = h_conv.sampler(init_rng, n_particles)
    clouds = {
        "f": ParticleCloud(pts_f, np.zeros(n_particles)),
        "g": ParticleCloud(pts_g, np.zeros(n_particles)),
        "h": ParticleCloud(pts_h, np.zeros(n_particles)),
    }
    n_steps = int(round(schedule.t_max / schedule.dt))
    records = []
    b_path = []
    int_d = 0.0
    t = 0.0
    warned = False
    stopped = False
    for step in range(n_steps + 1):
        mf = weighted_moments(clouds["f"])
        mg = weighted_moments(clouds["g"])
        # same stopping rule as the single-measure engine: once the f-side
        # covariance has collapsed, whitening is numerically meaningless
        if float(np.trace(mf.A)) < schedule.stop_trace_frac * n:
            stopped = True
        mh_wp, mh0 = clouds["h"].measure()
        s_val = h_conv.total_mass * float(
            np.exp(mh0) * mh_wp.total / n_particles
        )
        ess = (mf.n_eff, mg.n_eff, clouds["h"].n_eff())
        if min(ess) < min_ess and not warned:
            warnings.warn(f"coupled run {seed}: ESS {min(ess):.0f} at t={t:.2f}")
            warned = True
        if stopped:
            d_mat, delta = np.zeros((n, n)), np.zeros(n)
        else:
            d_mat, delta = mismatch_matrix(mf.A, mg.A)
        d_hs_sq = float(np.sum(d_mat * d_mat))
        b_path.append(mg.a.copy())
        if step % schedule.stride == 0 or step == n_steps or stopped:
            records.append(
                CoupledRecord(
                    t=t,
                    a=mf.a.copy(),
                    b=mg.a.copy(),
                    A=mf.A.copy(),
                    C=mg.A.copy(),
                    S=s_val,
                    mass_f=mf.V,
                    mass_g=mg.V,
                    d_hs_sq=d_hs_sq,
                    int_d_hs_sq=int_d,
                    gap_sq=float(np.sum((mf.a - mg.a) ** 2)),
                    delta=delta,
                    n_eff=ess,
                )
            )
        if step == n_steps or stopped:
            break
        dW = noise_rng.normal(size=n) * sqrt(schedule.dt)
        root_inv = sym_power(mf.A, -0.5)
        mid = 0.5 * (mf.a + mg.a)
        clouds["f"] = step_weights(clouds["f"], mf.a, root_inv, dW, schedule.dt)
        clouds["g"] = step_weights(clouds["g"], mg.a, root_inv, dW, schedule.dt)
        clouds["h"] = step_weights(clouds["h"], mid, root_inv, dW, schedule.dt)
        int_d += d_hs_sq * schedule.dt
        t += schedule.dt
    return CoupledTrajectory(
        records=records,
        rng_seed=seed,
        k_mass=h_conv.total_mass,
        dim=n,
        b_path=np.array(b_path),
    )


# ---------------------------------------------------------------------------
# ensemble diagnostics


def drift_diagnostic(runs, rel_tol=0.10, cov_tol=0.20, window=0.1, min_runs=100):
    """Optional-stopping identity and the g-side covariation structure.

    Across-run mean of |a_t - b_t|^2 must match the mean of the integrated
    ||D||_HS^2 within `rel_tol` relative plus CI; windowed realized
    covariation of the b-increments must match C A^{-1} C dt within
    `cov_tol` on average.
    """
    if len(runs) < min_runs:
        raise InsufficientRuns(f"need >= {min_runs} runs, got {len(runs)}")
    k = min(len(r.records) for r in runs)
    t = runs[0].times()[:k]
    # the measured squared gap carries the barycenter-estimation variance of
    # the two independent clouds, Tr(A)/N_eff + Tr(C)/N_eff; remove it
    gap = np.array(
        [
            [
                r.records[i].gap_sq
                - np.trace(r.records[i].A) / r.records[i].n_eff[0]
                - np.trace(r.records[i].C) / r.records[i].n_eff[1]
                for i in range(k)
            ]
            for r in runs
        ]
    )
    intd = np.array([[r.records[i].int_d_hs_sq for i in range(k)] for r in runs])
    m_gap, m_int = gap.mean(axis=0), intd.mean(axis=0)
    se = (gap - intd).std(axis=0, ddof=1) / sqrt(len(runs))
    scale = np.maximum(np.maximum(m_gap, m_int), 1e-12)
    ok = np.abs(m_gap - m_int) <= rel_tol * scale + 3.0 * se + 1e-12
    # realized covariation of db against the predicted C A^{-1} C dt,
    # averaged across runs before comparing (per-run QV noise is O(20%))
    real_acc = np.zeros((runs[0].dim, runs[0].dim))
    pred_acc = np.zeros_like(real_acc)
    rec_dt = runs[0].records[1].t - runs[0].records[0].t if k > 1 else 0.0
    for r in runs:
        db = np.diff(r.b_path, axis=0)
        real_acc += np.einsum("pi,pj->ij", db, db)
        pred_acc += sum(
            rec.C @ np.linalg.inv(rec.A) @ rec.C for rec in r.records[:-1]
        ) * rec_dt
    denom = max(float(np.max(np.abs(pred_acc))), 1e-12)
    mean_cov_err = float(np.max(np.abs(real_acc - pred_acc))) / denom
    return {
        "t": t,
        "mean_gap_sq": m_gap,
        "mean_int_d": m_int,
        "identity_pass": bool(np.all(ok)),
        "covariation_rel_err": mean_cov_err,
        "covariation_pass": mean_cov_err <= cov_tol,
        "pass": bool(np.all(ok)) and mean_cov_err <= cov_tol,
    }


def s_martingale_check(runs, min_runs=100):
    """Across-run mean of the h-cloud mass stays at K(f, g) (3 stderr)."""
    if len(runs) < min_runs:
        raise InsufficientRuns(f"need >= {min_runs} runs, got {len(runs)}")
    k_mass = runs[0].k_mass
    kk = min(len(r.records) for r in runs)
    s = np.array([[r.records[i].S for i in range(kk)] for r in runs])
    mean = s.mean(axis=0)
    se = s.std(axis=0, ddof=1) / sqrt(len(runs))
    dev = np.abs(mean - k_mass)
    return {
        "t": runs[0].times()[:kk],
        "mean_S": mean,
        "stderr": se,
        "K": k_mass,
        "pass": bool(np.all(dev <= 3.0 * se + 1e-9)),
        "worst_dev_in_stderr": float(np.max(dev / np.maximum(se, 1e-300))),
    }


def wasserstein_coupling(runs, eps, opnorm_cap=10.0):
    """Empirical transport bound from the coupled ensemble at the final time.

    Keeps runs whose h-mass never exceeds 2K/eps and whose f-covariance
    norm stays under the cap, then reports
    sqrt(mean of (sqrt(TrA_T) + sqrt(TrC_T) + |a_T - b_T|)^2) over kept
    runs, together with the Doob-style mass-cap event frequency.
    """
    k_mass = runs[0].k_mass
    cap = 2.0 * k_mass / eps
    kept, flags = [], []
    for r in runs:
        s_max = max(rec.S for rec in r.records)
        op_max = max(float(np.max(np.linalg.eigvalsh(rec.A))) for rec in r.records)
        ok = s_max <= cap and op_max <= opnorm_cap
        flags.append(ok)
        if ok:
            kept.append(r)
    if not kept:
        raise AllRunsExcluded("every run breached the mass or norm caps")
    vals = []
    for r in kept:
        rec = r.records[-1]
        vals.append(
            (
                sqrt(max(float(np.trace(rec.A)), 0.0))
                + sqrt(max(float(np.trace(rec.C)), 0.0))
                + sqrt(rec.gap_sq)
            )
            ** 2
        )
    return {
        "bound": float(np.sqrt(np.mean(vals))),
        "kept_fraction": float(np.mean(flags)),
        "doob_floor": 1.0 - eps / 2.0,
        "mass_cap": cap,
        "n_kept": len(kept),
    }


def wasserstein_1d_exact(f, g, rng=None, n_samples=400_000):
    """Quantile-coupling W2 between two 1D densities (Monte Carlo)."""
    if f.dim != 1 or g.dim != 1:
        raise ValueError("exact quantile coupling is 1D only")
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.sort(f.sampler(rng, n_samples)[:, 0])
    y = np.sort(g.sampler(rng, n_samples)[:, 0])
    return float(np.sqrt(np.mean((x - y) ** 2)))


# ---------------------------------------------------------------------------
# volume-stability pipeline


def bm_stability_experiment(
    k_spec,
    t_spec,
    eps,
    schedule=None,
    seeds=range(100),
    n_particles=4000,
    rng=None,
    n_samples=200_000,
):
    """Desk-scale stability-of-volume pipeline for two convex bodies.

    Localizes the isotropically rescaled uniform measures in coupled runs,
    turns the final transport bound W into a displacement radius
    delta = L_K * W / sqrt(eps) (Markov step), and compares against the
    direct geometric delta* = (1 - eps)-quantile of dist(X, T) for X
    uniform in K.  Report only; no formula constants are claimed.
    """
    from .engine import Schedule
    from .measures import exact_moments, isotropize, uniform_body

    fk = uniform_body(k_spec)
    ft = uniform_body(t_spec)
    mk = exact_moments(fk)
    l_k = sqrt(float(np.trace(mk.covariance)) / k_spec.dim)
    f_iso, _ = isotropize(fk, mk)
    g_iso, _ = isotropize(ft, exact_moments(ft))
    if schedule is None:
        schedule = Schedule(dt=0.02, t_max=3.0, stride=5)
    h_conv = sup_convolution(f_iso, g_iso)
    runs = [
        run_coupled(f_iso, g_iso, schedule, seed, n_particles=n_particles, h_conv=h_conv)
        for seed in seeds
    ]
    wrep = wasserstein_coupling(runs, eps)
    delta = l_k * wrep["bound"] / sqrt(eps)
    rng = rng if rng is not None else np.random.default_rng(0)
    x = bodies.sample(k_spec, rng, n_samples)
    d = bodies.distance(t_spec, x)
    delta_star = float(np.quantile(d, 1.0 - eps))
    return {
        "delta": delta,
        "delta_star": delta_star,
        "w_bound": wrep["bound"],
        "kept_fraction": wrep["kept_fraction"],
        "k_mass": h_conv.total_mass,
        "L_K": l_k,
    }
