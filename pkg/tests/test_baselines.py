import numpy as np
import pytest

from asyncsvrg.baselines import HogwildConfig, Trajectory, hogwild_run, svrg_sequential
from asyncsvrg.common import OPTION_AVERAGE
from asyncsvrg.engine import DivergenceError
from asyncsvrg.model import objective, smoothness_constant

LAM = 0.01


def test_sequential_converges_and_logs(small_data, small_ref):
    _, f_star = small_ref
    eta = 0.3 / smoothness_constant(small_data, LAM)
    traj = svrg_sequential(small_data, np.zeros(small_data.dim), eta,
                           2 * small_data.n, 20, seed=0, lam=LAM,
                           f_star=f_star, tol=1e-6)
    assert traj.objectives[-1] - f_star < 1e-6
    assert len(traj.snapshots) == len(traj.objectives)
    assert traj.rows[0].epoch == 0 and traj.rows[-1].gap < 1e-6
    # effective passes: anchor (1) + 2n samples (2) per epoch
    assert traj.rows[1].effective_passes == pytest.approx(3.0)


def test_sequential_average_option_differs(small_data):
    eta = 0.1 / smoothness_constant(small_data, LAM)
    kw = dict(eta=eta, inner_steps=100, epochs=2, seed=3, lam=LAM)
    current = svrg_sequential(small_data, np.zeros(small_data.dim), **kw)
    average = svrg_sequential(small_data, np.zeros(small_data.dim),
                              option=OPTION_AVERAGE, **kw)
    assert not np.array_equal(current.final_point, average.final_point)
    assert np.isfinite(objective(small_data, average.final_point, LAM))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_sequential_divergence_detected(small_data):
    with pytest.raises(DivergenceError):
        svrg_sequential(small_data, np.zeros(small_data.dim), 1e4,
                        2 * small_data.n, 5, seed=0, lam=LAM)


def test_hogwild_single_worker_descends(small_data):
    L = smoothness_constant(small_data, LAM)
    cfg = HogwildConfig(step_size=0.5 / L, decay=0.9, workers=1, epochs=10,
                        seed=0)
    traj = hogwild_run(small_data, cfg, lock=False, lam=LAM)
    assert traj.objectives[-1] < traj.objectives[0]
    assert traj.rows[-1].effective_passes == pytest.approx(10.0)


@pytest.mark.parametrize("lock", [True, False])
def test_hogwild_parallel_runs(small_data, lock):
    L = smoothness_constant(small_data, LAM)
    cfg = HogwildConfig(step_size=0.3 / L, decay=0.8, workers=2, epochs=10,
                        seed=1)
    traj = hogwild_run(small_data, cfg, lock=lock, lam=LAM)
    assert traj.objectives[-1] < traj.objectives[0]
    assert len(traj.snapshots) == 11


def test_hogwild_config_validation():
    with pytest.raises(ValueError):
        HogwildConfig(step_size=-1.0)
    with pytest.raises(ValueError):
        HogwildConfig(step_size=0.1, decay=0.0)
    with pytest.raises(ValueError):
        HogwildConfig(step_size=0.1, workers=0)
