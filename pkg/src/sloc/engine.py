"""Evolution of the localization process.

Two equivalent realizations share one Euler-Maruyama loop: the tilt path
updates (c, B) from moments of the tilted density, and the weight path keeps
a fixed particle cloud whose log-weights receive exact-exponential updates.
Both consume the same counter-based Brownian stream for a given seed, so the
paths can be replayed against each other increment by increment.
"""

import csv
import warnings
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .linalg import CovarianceFloorBreach, sym_inv, sym_power, symmetrize
from .tilt import (
    GaussianClosedForm,
    GridQuadrature,
    ParticleWeights,
    TiltedMoments,
    TiltState,
    WeightedPoints,
    tilted_moments,
)


class DegenerateCloud(RuntimeError):
    pass


@dataclass
class Schedule:
    dt: float
    t_max: float
    stride: int = 1
    stop_trace_frac: float = 1e-4  # stop when Tr(A) < frac * n
    step_norm_clamp: float = 5.0

    def validate(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_max < self.dt:
            raise ValueError("t_max must be at least dt")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class StepRecord:
    t: float
    c: np.ndarray
    B: np.ndarray
    V: float
    a: np.ndarray
    A: np.ndarray
    eigvals: np.ndarray
    n_eff: float
    int_A: np.ndarray  # cumulative integral of A over [0, t]

    @property
    def Atilde(self):
        return self.A + self.int_A


@dataclass
class Trajectory:
    records: list
    rng_seed: int
    schedule: Schedule
    dim: int
    notes: list = field(default_factory=list)

    def times(self):
        return np.array([r.t for r in self.records])

    def stack(self, attr):
        return np.array([getattr(r, attr) for r in self.records])


@dataclass
class ParticleCloud:
    """Fixed sample points with evolving log-weights realizing F_t."""

    points: np.ndarray
    log_weights: np.ndarray

    @property
    def n(self):
        return self.points.shape[0]

    def measure(self):
        m0 = float(np.max(self.log_weights))
        return WeightedPoints(
            points=self.points, weights=np.exp(self.log_weights - m0)
        ), m0

    def n_eff(self):
        wp, _ = self.measure()
        wn = wp.normalized()
        return 1.0 / float(np.sum(wn**2))


def weighted_moments(cloud, bessel=True):
    """Cloud moments: V = mean weight, a/A weighted mean and covariance."""
    wp, m0 = cloud.measure()
    if wp.total <= 0:
        raise DegenerateCloud("all particle weights underflowed")
    m = wp.moments(bessel=bessel)
    m.V = float(np.exp(m0) * wp.total / cloud.n)
    return m


def step_tilt(state, moments, dW, dt):
    """One Euler-Maruyama step of the tilt SDE.

    c += A^{-1/2} dW + A^{-1} a dt;  B += A^{-1} dt.
    """
    a_inv = sym_inv(moments.A)
    root_inv = sym_power(moments.A, -0.5)
    c = state.c + root_inv @ dW + a_inv @ moments.a * dt
    b = symmetrize(state.B + a_inv * dt)
    return TiltState(c=c, B=b, t=state.t + dt)


def step_weights(cloud, a, A_inv_sqrt, dW, dt):
    """Exact-exponential log-weight update realizing dF_t.

    log w_i += <x_i - a, A^{-1/2} dW> - 0.5 |A^{-1/2}(x_i - a)|^2 dt.
    The multiplier has conditional mean exactly 1, so each weight stays a
    discrete-time martingale.
    """
    # z_i = A^{-1/2}(x_i - a), so <x_i - a, A^{-1/2} dW> = z_i . dW by symmetry
    z = (cloud.points - a) @ A_inv_sqrt.T
    incr = z @ dW - 0.5 * np.sum(z * z, axis=1) * dt
    return ParticleCloud(points=cloud.points, log_weights=cloud.log_weights + incr)


def brownian_stream(seed):
    """Counter-based (Philox) noise generator: replayable across paths."""
    init_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return (
        np.random.Generator(np.random.Philox(init_ss)),
        np.random.Generator(np.random.Philox(noise_ss)),
    )


def run_trajectory(
    f,
    schedule,
    strategy,
    seed,
    observers=(),
    check_isotropic=True,
    isotropic_tol=0.05,
    on_degenerate="warn",
):
    """Run one localization trajectory and record (t, c, B, V, a, A, ...).

    Stops at t_max or when Tr(A_t) drops below stop_trace_frac * n.  The
    observers are callables (record, cloud_or_None) -> None invoked at each
    recorded step.
    """
    schedule.validate()
    n = f.dim
    if check_isotropic:
        from .measures import exact_moments

        m0 = exact_moments(f)
        if np.linalg.norm(m0.barycenter) > isotropic_tol or np.max(
            np.abs(m0.covariance - np.eye(n))
        ) > isotropic_tol:
            raise ValueError("run_trajectory requires an isotropic density")

    init_rng, noise_rng = brownian_stream(seed)
    state = TiltState.initial(n)
    cloud = None
    if isinstance(strategy, ParticleWeights):
        if f.sampler is None:
            raise ValueError("particle strategy requires an exact sampler")
        pts = f.sampler(init_rng, strategy.n_particles)
        cloud = ParticleCloud(points=pts, log_weights=np.zeros(strategy.n_particles))
    if isinstance(strategy, GridQuadrature):
        strategy.window_center = None  # fresh window per trajectory

    records, notes = [], []
    int_a = np.zeros((n, n))
    last_a_mat = None
    n_steps = int(round(schedule.t_max / schedule.dt))
    step = 0
    while True:
        if cloud is not None:
            m = weighted_moments(cloud, bessel=strategy.bessel)
            if m.n_eff < strategy.min_ess:
                msg = f"effective sample size {m.n_eff:.1f} below floor at t={state.t:.3f}"
                notes.append(msg)
                if on_degenerate == "abort":
                    break
                elif on_degenerate == "warn" and len(notes) == 1:
                    warnings.warn(msg)
        else:
            m = tilted_moments(f, state, strategy)

        if last_a_mat is not None:
            int_a = int_a + 0.5 * schedule.dt * (last_a_mat + m.A)
        last_a_mat = m.A

        stopping = (
            step >= n_steps
            or float(np.trace(m.A)) < schedule.stop_trace_frac * n
        )
        if step % schedule.stride == 0 or stopping:
            rec = StepRecord(
                t=state.t,
                c=state.c.copy(),
                B=state.B.copy(),
                V=m.V,
                a=m.a.copy(),
                A=m.A.copy(),
                eigvals=np.linalg.eigvalsh(m.A),
                n_eff=m.n_eff,
                int_A=int_a.copy(),
            )
            records.append(rec)
            for obs in observers:
                obs(rec, cloud)

        if stopping:
            break

        dW = noise_rng.normal(size=n) * sqrt(schedule.dt)
        try:
            state, cloud = _advance(
                f, state, cloud, m, dW, schedule.dt, schedule, strategy, noise_rng, 0
            )
        except CovarianceFloorBreach as exc:
            # a cloud whose weights concentrated onto a lower-dimensional
            # set cannot be whitened further; end the path at this record
            notes.append(f"stopped at t={state.t:.3f}: {exc}")
            break
        step += 1

    return Trajectory(
        records=records, rng_seed=seed, schedule=schedule, dim=n, notes=notes
    )


def _advance(f, state, cloud, m, dW, dt, schedule, strategy, noise_rng, depth):
    """Advance one step; split via a Brownian bridge on rare large kicks."""
    root_inv = sym_power(m.A, -0.5)
    if depth < 4 and float(np.linalg.norm(root_inv @ dW)) > schedule.step_norm_clamp:
        mid = 0.5 * dW + noise_rng.normal(size=dW.shape) * (0.5 * sqrt(dt))
        state, cloud = _advance(
            f, state, cloud, m, mid, 0.5 * dt, schedule, strategy, noise_rng, depth + 1
        )
        if cloud is not None:
            m = weighted_moments(cloud, bessel=strategy.bessel)
        else:
            m = tilted_moments(f, state, strategy)
        return _advance(
            f, state, cloud, m, dW - mid, 0.5 * dt, schedule, strategy, noise_rng, depth + 1
        )
    new_state = step_tilt(state, m, dW, dt)
    if cloud is not None:
        cloud = step_weights(cloud, m.a, root_inv, dW, dt)
    return new_state, cloud


def cross_check_paths(f, schedule, seed, n_particles=100_000, order=None):
    """Run tilt path and weight path on the same Brownian increments.

    Returns per-time discrepancies of barycenter and covariance; both paths
    approximate the same process, so the maxima must shrink as N grows and
    dt shrinks.
    """
    quad = (
        GaussianClosedForm()
        if f.gaussian_tilt_oracle is not None
        else GridQuadrature(**({"order": order} if order else {}))
    )
    t_tilt = run_trajectory(f, schedule, quad, seed)
    t_cloud = run_trajectory(
        f, schedule, ParticleWeights(n_particles=n_particles), seed
    )
    k = min(len(t_tilt.records), len(t_cloud.records))
    a_gap = np.array(
        [
            np.linalg.norm(t_tilt.records[i].a - t_cloud.records[i].a)
            for i in range(k)
        ]
    )
    a_opgap = np.array(
        [
            np.max(
                np.abs(
                    np.linalg.eigvalsh(t_tilt.records[i].A - t_cloud.records[i].A)
                )
            )
            for i in range(k)
        ]
    )
    return {
        "t": t_tilt.times()[:k],
        "barycenter_gap": a_gap,
        "covariance_opnorm_gap": a_opgap,
        "max_barycenter_gap": float(a_gap.max()),
        "max_covariance_opnorm_gap": float(a_opgap.max()),
    }


# ---------------------------------------------------------------------------
# CSV emission ("sloc-csv v1")

CSV_VERSION_LINE = "# sloc-csv v1"


def csv_columns(n):
    cols = ["t", "V"]
    cols += [f"a_{i+1}" for i in range(n)]
    cols += [f"A_{i+1}{j+1}" for i in range(n) for j in range(i, n)]
    cols += [f"eig_{i+1}" for i in range(n)]
    cols += ["N_eff", "traceAtilde"]
    return cols


def write_trajectory_csv(traj, path):
    n = traj.dim
    iu = [(i, j) for i in range(n) for j in range(i, n)]
    with open(path, "w", newline="") as fh:
        fh.write(CSV_VERSION_LINE + "\n")
        writer = csv.writer(fh)
        writer.writerow(csv_columns(n))
        for r in traj.records:
            row = [repr(float(r.t)), repr(float(r.V))]
            row += [repr(float(v)) for v in r.a]
            row += [repr(float(r.A[i, j])) for i, j in iu]
            row += [repr(float(v)) for v in r.eigvals]
            row += [repr(float(r.n_eff)), repr(float(np.trace(r.Atilde)))]
            writer.writerow(row)
