import numpy as np
import pytest

from headbasis.gradients import CHECKS, MODEL_FLOOR, check_model, run_suite
from headbasis.nets import grad_check


@pytest.mark.parametrize("name", sorted(CHECKS))
@pytest.mark.parametrize("seed", range(10))
def test_instance_checks_pass(name, seed):
    rep = CHECKS[name](seed)
    assert rep.passed, (name, seed, rep.failures())
    assert rep.errors


def test_suite_reports_every_check():
    reports = run_suite(range(3))
    assert set(reports) == set(CHECKS)
    assert all(r.passed for r in reports.values())
    assert reports["landmark"].tolerance == 1e-6


def test_checker_detects_a_wrong_gradient():
    params = {"x": np.array([1.0, -2.0, 0.5])}

    def wrong():
        x = params["x"]
        return float(np.sum(x ** 3)), {"x": 3 * x ** 2 + np.array([0.0, 1e-2, 0.0])}

    rep = grad_check(params, wrong, 1e-4, 1e-5)
    assert not rep.passed and rep.failures() == ["x"]
    assert rep.worst_index["x"] == (1,)


def test_model_objectives(small_ckpt, face):
    reports = check_model(small_ckpt.model, small_ckpt.config, face, seed=1, max_entries=60)
    assert set(reports) == {"stage1", "stage2", "stage3"}
    for name, rep in reports.items():
        assert rep.passed, (name, rep.failures())
    assert MODEL_FLOOR == 1e-5
