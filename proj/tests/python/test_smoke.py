import json
import math

import numpy as np
import pytest

import starflow


def test_unit_sphere_frame():
    g = starflow.sphere(2, 64)
    assert g.mode == "AXISYM" or g.mode.lower().startswith("axisym")
    assert len(g) == 65
    f = starflow.compute_frame(g)
    np.testing.assert_allclose(f["H"], 2.0, rtol=1e-12)
    np.testing.assert_allclose(f["support"], 1.0, rtol=1e-14)
    assert f["area"] == pytest.approx(4.0 * math.pi, rel=1e-3)


def test_sphere_step_follows_the_radius_law():
    g = starflow.step(starflow.sphere(2, 64), 1e-4)
    assert g.t == 1e-4
    np.testing.assert_allclose(g.r, math.sqrt(1.0 - 4e-4), atol=1e-10)


def test_F_is_positive_and_noncollapsing_on_the_sphere():
    g = starflow.sphere(2, 64)
    assert np.all(starflow.compute_F(g) > 0.0)
    nc = starflow.noncollapsing(g, images=16)
    assert set(nc) == {"min_Zstar_over_F", "max_Zsup_over_F", "alpha_int", "alpha_ext"}


def test_weighted_area_closed_form():
    assert starflow.sphere_weighted_area(2, 3.0) == pytest.approx(1073.0, rel=1e-4)


def test_arrival_solution_near_log_2_5():
    s = starflow.solve_arrival(eps=0.05, M=512)
    assert s["v0"] == pytest.approx(math.log(2.5), abs=0.05)
    assert s["residual"] <= s["residual_target"]


def test_errors_surface_as_starflow_error():
    with pytest.raises(starflow.StarflowError, match="BAD_GRID"):
        starflow.sphere(2, 8)
    with pytest.raises(starflow.StarflowError, match="BAD_SIGMA"):
        starflow.solve_arrival(sigma=0.3)


def test_run_experiment_and_reevaluate(tmp_path):
    cfg = {
        "name": "py_sphere",
        "flow": {"shape": {"kind": "sphere", "radius": 1.0}, "n": 2, "N": 48,
                 "monitor_every": 50, "stop_rmin": 0.05},
        "monitors": {"images": 16},
        "rescaling": {"slice_time": 0.1},
        "expect": {"tangent_flow": "SPHERE"},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    rep = starflow.run_experiment(str(path), str(tmp_path / "run"))
    assert rep["summary"]["fail"] == 0
    again = starflow.evaluate_properties(str(tmp_path / "run"))
    assert again == rep
