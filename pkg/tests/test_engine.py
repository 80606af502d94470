import numpy as np
import pytest
from math import exp, sqrt

from sloc.bodies import BodySpec
from sloc.engine import (
    ParticleCloud,
    Schedule,
    brownian_stream,
    cross_check_paths,
    csv_columns,
    run_trajectory,
    step_tilt,
    step_weights,
    write_trajectory_csv,
    CSV_VERSION_LINE,
)
from sloc.measures import standard_gaussian, uniform_body
from sloc.tilt import (
    GaussianClosedForm,
    GridQuadrature,
    ParticleWeights,
    TiltState,
    TiltedMoments,
)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(dt=0.0, t_max=1.0).validate()
    with pytest.raises(ValueError):
        Schedule(dt=0.1, t_max=0.05).validate()
    with pytest.raises(ValueError):
        Schedule(dt=0.1, t_max=1.0, stride=0).validate()


def test_step_tilt_identity_covariance():
    # with A = I and a = 0 the update reduces to c += dW, B += I dt
    st = TiltState.initial(2)
    m = TiltedMoments(V=1.0, a=np.zeros(2), A=np.eye(2))
    dW = np.array([0.3, -0.1])
    out = step_tilt(st, m, dW, 0.5)
    assert np.allclose(out.c, dW)
    assert np.allclose(out.B, 0.5 * np.eye(2))
    assert out.t == pytest.approx(0.5)


def test_step_weights_martingale_mean():
    # the weight multiplier exp(z.dW - |z|^2 dt / 2) has mean exactly one
    rng = np.random.default_rng(0)
    pts = np.array([[1.5, -0.5]])
    cloud = ParticleCloud(points=pts, log_weights=np.zeros(1))
    dt = 0.1
    mult = []
    for _ in range(200_000):
        dW = rng.normal(size=2) * sqrt(dt)
        out = step_weights(cloud, np.zeros(2), np.eye(2), dW, dt)
        mult.append(exp(out.log_weights[0]))
    mean = np.mean(mult)
    se = np.std(mult) / sqrt(len(mult))
    assert abs(mean - 1.0) < 4.0 * se


def test_brownian_stream_replays():
    i1, n1 = brownian_stream(123)
    i2, n2 = brownian_stream(123)
    assert np.array_equal(n1.normal(size=10), n2.normal(size=10))
    assert np.array_equal(i1.normal(size=10), i2.normal(size=10))


def test_gaussian_trajectory_matches_exponential_law():
    # closed form: B_t = (e^t - 1) I and A_t = e^{-t} I along the whole path
    sched = Schedule(dt=1e-3, t_max=1.0, stride=100)
    traj = run_trajectory(standard_gaussian(2), sched, GaussianClosedForm(), seed=1)
    for rec in traj.records:
        assert np.allclose(rec.B, (exp(rec.t) - 1.0) * np.eye(2), rtol=0.05, atol=1e-2)
        assert np.allclose(rec.A, exp(-rec.t) * np.eye(2), rtol=0.05)
        # the companion matrix A_t + int_0^t A_s ds stays at the identity
        assert np.allclose(rec.Atilde, np.eye(2), atol=0.01)


def test_trajectory_records_and_stacks():
    sched = Schedule(dt=0.01, t_max=0.2, stride=5)
    traj = run_trajectory(standard_gaussian(1), sched, GaussianClosedForm(), seed=3)
    ts = traj.times()
    assert ts[0] == 0.0
    assert ts[-1] == pytest.approx(0.2, abs=1e-9)
    assert traj.stack("A").shape == (len(ts), 1, 1)


def test_stop_rule_halts_before_t_max():
    sched = Schedule(dt=0.01, t_max=50.0, stride=10, stop_trace_frac=1e-3)
    traj = run_trajectory(standard_gaussian(1), sched, GaussianClosedForm(), seed=7)
    last = traj.records[-1]
    assert last.t < 50.0
    assert float(np.trace(last.A)) < 2e-3


def test_rejects_anisotropic_density():
    f = uniform_body(BodySpec("cube", 2, {"side": 1.0}))  # variance 1/12
    with pytest.raises(ValueError):
        run_trajectory(f, Schedule(dt=0.01, t_max=0.1), GridQuadrature(), seed=0)


def test_cloud_run_tracks_quadrature():
    gaps = cross_check_paths(
        standard_gaussian(2),
        Schedule(dt=0.01, t_max=0.5, stride=10),
        seed=11,
        n_particles=50_000,
    )
    assert gaps["max_barycenter_gap"] < 0.05
    assert gaps["max_covariance_opnorm_gap"] < 0.05


def test_cloud_low_ess_note():
    with pytest.warns(UserWarning):
        traj = run_trajectory(
            standard_gaussian(1),
            Schedule(dt=0.05, t_max=4.0),
            ParticleWeights(n_particles=200, min_ess=150.0),
            seed=2,
        )
    assert traj.notes


def test_csv_columns_layout():
    assert csv_columns(2) == [
        "t",
        "V",
        "a_1",
        "a_2",
        "A_11",
        "A_12",
        "A_22",
        "eig_1",
        "eig_2",
        "N_eff",
        "traceAtilde",
    ]


def test_csv_output_deterministic(tmp_path):
    sched = Schedule(dt=0.01, t_max=0.3, stride=10)
    paths = []
    for name in ("a.csv", "b.csv"):
        traj = run_trajectory(standard_gaussian(2), sched, GaussianClosedForm(), seed=5)
        p = tmp_path / name
        write_trajectory_csv(traj, p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]
    text = paths[0].decode()
    assert text.splitlines()[0] == CSV_VERSION_LINE
    assert text.splitlines()[1].split(",") == csv_columns(2)
    # a different seed produces a different byte stream
    other = run_trajectory(standard_gaussian(2), sched, GaussianClosedForm(), seed=6)
    p = tmp_path / "c.csv"
    write_trajectory_csv(other, p)
    assert p.read_bytes() != paths[0]


@pytest.mark.slow
def test_localized_point_distributed_as_base_measure():
    # as t grows the tilted mean a_T converges to a sample from the original
    # density; compare many endpoints to direct samples via a two-sample test
    from scipy.stats import ks_2samp

    f = standard_gaussian(1)
    sched = Schedule(dt=0.01, t_max=8.0, stride=100, stop_trace_frac=1e-4)
    ends = []
    for s in range(400):
        traj = run_trajectory(f, sched, GaussianClosedForm(), seed=1000 + s)
        ends.append(traj.records[-1].a[0])
    direct = np.random.default_rng(0).normal(size=4000)
    assert ks_2samp(np.array(ends), direct).pvalue > 0.01
