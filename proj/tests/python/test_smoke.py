import json
import math

import numpy as np
import pytest

import fbsde_control as fc


def test_cost_matches_exact_moments():
    p = fc.LqParams()
    n = 20
    bias, gain = [0.1] * n, [-0.4] * n
    mean, se = fc.estimate_cost(p, bias, gain, paths=20000, seed=3)
    assert abs(mean - fc.exact_cost(p, bias, gain)) <= 3 * se


def test_simulate_shapes_and_density():
    p = fc.LqParams()
    out = fc.simulate(p, [0.0] * 10, [0.0] * 10, paths=500, seed=1)
    assert out["x"].shape == (500, 11)
    assert out["u"].shape == (500, 10)
    assert len(out["t"]) == 11
    assert np.all(out["rho"] > 0)
    assert np.allclose(out["rho"][:, 0], 1.0)


def test_thread_count_does_not_change_results():
    p = fc.LqParams()
    fc.set_thread_count(1)
    a = fc.estimate_cost(p, [0.2] * 10, [0.0] * 10, paths=5000)
    fc.set_thread_count(3)
    b = fc.estimate_cost(p, [0.2] * 10, [0.0] * 10, paths=5000)
    fc.set_thread_count(0)
    assert a == b


def test_optimize_lowers_cost():
    p = fc.LqParams()
    res = fc.optimize(p, N=10, paths=4000, max_iters=5)
    assert res["costs"][-1] <= res["costs"][0]
    assert len(res["bias"]) == 10
    assert math.isfinite(json.loads(res["report"])["necessary_residual"])


def test_errors_map_to_python_exceptions():
    p = fc.LqParams()
    p.T = -1.0
    with pytest.raises(ValueError):
        fc.estimate_cost(p, [0.0] * 5, [0.0] * 5, paths=100)
    with pytest.raises(ValueError):
        fc.estimate_cost(fc.LqParams(), [0.0] * 5, [0.0] * 4, paths=100)
    with pytest.raises(fc.ConfigError, match="monte_carlo.pathz"):
        fc.run_command("simulate", json.dumps({"problem": {"builtin": "lq"}, "monte_carlo": {"pathz": 1}}))
