"""Spectral diagnostics of the covariance flow.

Covers the companion matrix (covariance plus its running time integral,
whose trace is an exact martingale), the whitened third-moment vectors that
drive eigenvalue repulsion, and ensemble checks of the trace identity,
drift bounds, and operator-norm decay envelope.
"""

from dataclasses import dataclass

import numpy as np

from .tilt import whitened


class InsufficientRuns(ValueError):
    pass


class InconsistentTime(ValueError):
    pass


@dataclass
class XiTensor:
    """xi[i, j] is an n-vector; symmetric in (i, j)."""

    xi: np.ndarray  # (n, n, n): last axis is the vector component
    basis: np.ndarray  # orthonormal columns v_1..v_n
    t: float = 0.0


@dataclass
class TracePower:
    p: int
    S: float


def companion_matrix(record):
    """A_t + integral of A over [0, t]; equals Id at t = 0 (isotropic start)."""
    return record.Atilde


def trace_power(record, p):
    atil = record.Atilde
    return TracePower(p=p, S=float(np.trace(np.linalg.matrix_power(atil, p))))


def xi_vectors(wp, a, A, basis=None, t=0.0):
    """Whitened third-moment contractions in the given orthonormal basis.

    xi_{i,j} = integral of <y, v_i> <y, v_j> y against the whitened measure
    y = A^{-1/2}(x - a).  `wp` is the weighted-point realization of the
    tilted measure (quadrature grid or particle cloud).
    """
    n = wp.points.shape[1]
    if basis is None:
        basis = np.eye(n)
    basis = np.asarray(basis, dtype=float)
    gram = basis.T @ basis
    if not np.allclose(gram, np.eye(n), atol=1e-8):
        raise ValueError("basis must be orthonormal within 1e-8")
    white = whitened(wp, a, A)
    wn = white.normalized()
    u = white.points @ basis  # coordinates along v_i
    xi = np.einsum("p,pi,pj,pk->ijk", wn, u, u, white.points)
    return XiTensor(xi=xi, basis=basis, t=t)


def xi_row_hs_norms(wp, a, A, basis):
    """||integral y (x) y <y, v_i> dmu||_HS for each i (Hilbert-Schmidt)."""
    white = whitened(wp, a, A)
    wn = white.normalized()
    u = white.points @ basis
    m = np.einsum("p,pi,pj,pk->ijk", wn, u, white.points, white.points)
    return np.sqrt(np.sum(m**2, axis=(1, 2)))


def whitened_fourth_moments(wp, a, A, basis):
    """E <y, v_i>^4 under the whitened measure, per basis direction."""
    white = whitened(wp, a, A)
    wn = white.normalized()
    u = white.points @ basis
    return np.einsum("p,pi->i", wn, u**4)


def check_xi_bounds(xi, fourth_moments, row_hs=None, t=None):
    """Diagonal Cauchy-Schwarz bound and the row-sum identity.

    |xi_{i,i}| <= sqrt(E <y, v_i>^4) holds with the measure's own fourth
    moment (no universal constant); the squared row sums equal the squared
    HS norms of the contracted second-moment matrices.
    """
    if t is not None and abs(t - xi.t) > 1e-12:
        raise InconsistentTime("xi and moments were computed at different times")
    n = xi.xi.shape[0]
    diag_norms = np.linalg.norm(xi.xi[np.arange(n), np.arange(n)], axis=-1)
    bound = np.sqrt(np.asarray(fourth_moments, dtype=float))
    row_sums = np.sqrt(np.sum(xi.xi**2, axis=(1, 2)))
    report = {
        "diag_norms": diag_norms,
        "diag_bound": bound,
        "diag_ok": bool(np.all(diag_norms <= bound * (1 + 1e-9) + 1e-12)),
        "row_norms": row_sums,
    }
    if row_hs is not None:
        report["row_hs_norms"] = np.asarray(row_hs, dtype=float)
        report["row_identity_gap"] = float(
            np.max(np.abs(row_sums - report["row_hs_norms"]))
        )
    return report


def _common_grid(runs):
    k = min(len(tr.records) for tr in runs)
    times = runs[0].times()[:k]
    for tr in runs[1:]:
        if not np.allclose(tr.times()[:k], times, atol=1e-9):
            raise InconsistentTime("trajectories do not share a time grid")
    return k, times


def trace_identity_check(runs, p=1, min_runs=30, atol=0.0):
    """Across-run mean of Tr(A_t + int A) must equal n at every time.

    The trace of the companion matrix is an exact martingale started at n,
    so the ensemble mean stays within 3 standard errors of n.  `atol` adds
    an absolute allowance for time-discretization bias; it is needed for
    deterministic paths (the closed-form Gaussian) whose standard error
    vanishes identically.
    """
    if len(runs) < min_runs:
        raise InsufficientRuns(f"need >= {min_runs} runs, got {len(runs)}")
    n = runs[0].dim
    k, times = _common_grid(runs)
    tr_tilde = np.array(
        [[np.trace(tr.records[i].Atilde) for i in range(k)] for tr in runs]
    )
    mean = tr_tilde.mean(axis=0)
    stderr = tr_tilde.std(axis=0, ddof=1) / np.sqrt(len(runs))
    dev = np.abs(mean - n)
    ok = dev <= 3.0 * stderr + atol + 1e-9
    tr_a = np.array(
        [[np.trace(tr.records[i].A) for i in range(k)] for tr in runs]
    ).mean(axis=0)
    return {
        "t": times,
        "mean_trace_Atilde": mean,
        "stderr": stderr,
        "target": float(n),
        "pass": bool(np.all(ok)),
        "worst_dev_in_stderr": float(np.max(dev / np.maximum(stderr, 1e-300))),
        "mean_trace_A": tr_a,
        "trace_A_bounded": bool(np.all(tr_a <= n + 3.0 * stderr + 1e-9)),
    }


def trace_power_drift(runs, p, kappa_sq, tol=0.1, n_boot=200, seed=0, min_runs=30):
    """Finite-variation drift of S_t = Tr(Atilde^p) vs the row-sum bound.

    The drift estimate is the across-run mean of S increments on the common
    grid with bootstrap confidence bands; the bound is
    p^2 * kappa^2 * S * (1 + tol), with kappa the per-measure third-moment
    statistic (scalar or per-time array).
    """
    if len(runs) < min_runs:
        raise InsufficientRuns(f"need >= {min_runs} runs, got {len(runs)}")
    k, times = _common_grid(runs)
    s = np.array(
        [
            [np.trace(np.linalg.matrix_power(tr.records[i].Atilde, p)) for i in range(k)]
            for tr in runs
        ]
    )
    incr = np.diff(s, axis=1)
    dtimes = np.diff(times)
    drift = incr.mean(axis=0) / dtimes
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(runs), size=(n_boot, len(runs)))
    boot = incr[idx].mean(axis=1) / dtimes
    lo, hi = np.percentile(boot, [2.5, 97.5], axis=0)
    kap = np.broadcast_to(np.asarray(kappa_sq, dtype=float), drift.shape)
    bound = p**2 * kap * s.mean(axis=0)[:-1] * (1.0 + tol)
    ok = drift <= bound + (hi - drift)  # allow the upper CI edge
    # at p = 1 the process is a martingale: the net change over the whole
    # path (one aggregate test, no per-time multiplicity) must straddle zero
    zero_ok = None
    if p == 1:
        net = s[:, -1] - s[:, 0]
        net_boot = net[idx].mean(axis=1)
        nlo, nhi = np.percentile(net_boot, [0.5, 99.5])
        zero_ok = bool(nlo <= 0.0 <= nhi)
    return {
        "t": times[:-1],
        "drift": drift,
        "ci_lo": lo,
        "ci_hi": hi,
        "bound": bound,
        "pass": bool(np.all(ok)),
        "p1_drift_zero": zero_ok,
        "mean_S": s.mean(axis=0),
    }


def opnorm_envelope(runs, percentile=99.0, burn_in=0.5, min_runs=30):
    """Empirical operator-norm envelope of A_t (report, not pass/fail).

    Fits an exponential decay rate and checks monotone decrease of the
    envelope after the burn-in time; the multiplicative constants of the
    high-probability bound are unspecified, so nothing sharper is asserted.
    """
    if len(runs) < min_runs:
        raise InsufficientRuns(f"need >= {min_runs} runs, got {len(runs)}")
    k, times = _common_grid(runs)
    ops = np.array(
        [
            [np.max(tr.records[i].eigvals) for i in range(k)]
            for tr in runs
        ]
    )
    env = np.percentile(ops, percentile, axis=0)
    pos = env > 0
    slope = np.polyfit(times[pos], np.log(env[pos]), 1)[0]
    after = times[:-1] >= burn_in
    dec = np.diff(env) <= 1e-12
    frac_dec = float(np.mean(dec[after])) if np.any(after) else float("nan")
    return {
        "t": times,
        "envelope": env,
        "decay_rate": float(-slope),
        "burn_in": burn_in,
        "fraction_decreasing_after_burn_in": frac_dec,
    }


def companion_dominates(runs, tol=1e-9):
    """Atilde - A is positive semi-definite at every record (eigen-check)."""
    worst = 0.0
    for tr in runs:
        for r in tr.records:
            lam = np.min(np.linalg.eigvalsh(r.int_A))
            worst = min(worst, float(lam))
    return {"min_eigenvalue_of_integral": worst, "pass": worst >= -tol}


def brascamp_lieb_ceiling(runs, tol=0.05):
    """||A_t||_OP * lambda_min(B_t) <= 1 + tol at every recorded t > 0.

    The tilted density is log-concave relative to the Gaussian with
    precision B_t, so its covariance is dominated by B_t^{-1}.
    """
    worst = 0.0
    for tr in runs:
        for r in tr.records:
            if r.t <= 0:
                continue
            lam_b = float(np.min(np.linalg.eigvalsh(r.B)))
            prod = float(np.max(r.eigvals)) * lam_b
            worst = max(worst, prod)
    return {"max_product": worst, "pass": worst <= 1.0 + tol}
