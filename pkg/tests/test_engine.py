import json

import numpy as np
import pytest

from resilient_dgd.box import FeasibleBox, project
from resilient_dgd.config import RunConfig
from resilient_dgd.engine import RunError, run, run_monte_carlo
from resilient_dgd.problem import ProblemInstance


def _cfg(**kw):
    return RunConfig.from_dict(kw)


def _xs(trace):
    return np.array(trace.xs)


def test_project_examples():
    box = FeasibleBox.cube(1.0, 2)
    np.testing.assert_array_equal(project(box, [0.2, -0.3]), [0.2, -0.3])
    np.testing.assert_array_equal(project(box, [2.0, 0.5]), [1.0, 0.5])


def test_projection_is_non_expansive():
    rng = np.random.default_rng(0)
    box = FeasibleBox(np.array([-1.0, 0.0, -3.0]), np.array([2.0, 0.5, -1.0]))
    for _ in range(100):
        x, y = rng.normal(scale=4, size=(2, 3))
        assert np.linalg.norm(project(box, x) - project(box, y)) <= np.linalg.norm(x - y) + 1e-12


def test_sync_constant_step_contracts():
    fam = {"generate": {"seed": 4, "n": 4, "d": 3, "spread": 1.0, "eig_low": 0.5, "eig_high": 1.5}}
    problem = ProblemInstance.from_config(_cfg(family=fam, iterations=1, box={"half_width": 5.0}))
    eta = 1.0 / (problem.n * problem.mu)
    trace = run(_cfg(family=fam, schedule={"kind": "constant", "eta": eta}, iterations=400,
                     box={"half_width": 5.0}, x0=[5.0, -5.0, 5.0]))
    dist = trace.distances()
    stop = int(np.argmax(dist < 1e-12)) if np.any(dist < 1e-12) else len(dist)
    assert stop < len(dist)
    assert np.all(np.diff(dist[: stop + 1]) < 0)


def test_zero_step_is_a_fixed_point():
    trace = run(_cfg(schedule={"kind": "constant", "eta": 0.0}, iterations=5, x0=[3.0]))
    assert all(x[0] == 3.0 for x in trace.xs)


def test_single_agent_at_minimizer_stays_put():
    fam = {"inline": {"agents": [{"A": [[2.0]], "b": [1.0]}]}}
    trace = run(_cfg(family=fam, iterations=10, x0=[0.5]))
    assert all(x[0] == 0.5 for x in trace.xs)


def test_trajectory_equivalence_without_stragglers():
    base = dict(family={"generate": {"seed": 1, "n": 5, "d": 2}}, iterations=300, x0=[4.0, -3.0])
    sync = _xs(run(_cfg(mode="sync", **base)))
    asyn = _xs(run(_cfg(mode="async", r=0, **base)))
    assert sync.tobytes() == asyn.tobytes()
    for tau in (0, 1, 3):
        stale = _xs(run(_cfg(mode="stale", tau=tau, r=0, **base)))
        assert stale.tobytes() == sync.tobytes()


def test_stale_tau_zero_matches_async_sum():
    base = dict(r=1, delay={"kind": "slow", "agents": [2], "extra": None}, iterations=200)
    a = _xs(run(_cfg(mode="async", **base)))
    s = _xs(run(_cfg(mode="stale", tau=0, **base)))
    assert a.tobytes() == s.tobytes()


def test_zero_delays_converge_to_minimizer():
    trace = run(_cfg(mode="async", iterations=20000))
    assert trace.distances()[-1] < 1e-6


def test_noiseless_stochastic_equals_deterministic():
    fam = {"generate": {"seed": 2, "n": 5, "d": 2}}
    common = dict(family=fam, r=1, delay={"kind": "geometric", "p": 0.5}, iterations=200,
                  schedule={"kind": "constant", "eta": 0.05}, box={"half_width": 5.0}, seed=9)
    det = run(_cfg(mode="async", **common))
    sto = run(_cfg(mode="stochastic", problem="CS", sigma=0.0, **common))
    assert _xs(det).tobytes() == _xs(sto).tobytes()
    assert det.bitmasks == sto.bitmasks


def test_zero_iterations_gives_initial_record_only():
    trace = run(_cfg(iterations=0))
    assert len(trace.xs) == 1 and trace.iterations == 0
    lines = trace.to_csv().splitlines()
    assert lines[0].startswith("t,dist") and len(lines) == 2


def test_runs_are_reproducible():
    cfg = _cfg(family={"generate": {"seed": 3, "n": 6, "d": 2}}, mode="stochastic", problem="DS", f=1, r=1,
               filter="cge", roles=["random:1.5"] + ["honest"] * 5, delay={"kind": "geometric", "p": 0.3},
               schedule={"kind": "constant", "eta": 0.01}, sigma=0.4, iterations=100, box={"half_width": 5.0})
    a, b = run(cfg), run(cfg)
    assert a.to_csv() == b.to_csv()
    assert a.to_json(include_vectors=True) == b.to_json(include_vectors=True)
    assert run(cfg, workers=3).to_csv() == a.to_csv()


def test_iterates_stay_in_box():
    cfg = _cfg(family={"generate": {"seed": 6, "n": 4, "d": 2, "spread": 0.5}}, f=1, filter="cge",
               roles=["large:50"] + ["honest"] * 3, iterations=300, box={"half_width": 1.0})
    trace = run(cfg)
    box = FeasibleBox.cube(1.0, 2)
    assert all(box.contains(x) for x in trace.xs)


def test_step_failure_reports_iteration():
    cfg = _cfg(mode="stale", tau=1, r=0, delay={"kind": "slow", "agents": [1], "extra": None}, iterations=10)
    with pytest.raises(RunError) as info:
        run(cfg)
    assert info.value.iteration == 0


def test_trace_json_layout():
    trace = run(_cfg(iterations=3))
    doc = json.loads(trace.to_json(include_vectors=True, provenance={"seed": 0}))
    assert [r["t"] for r in doc["records"]] == [0, 1, 2, 3]
    assert doc["records"][-1]["aggregate"] is None
    assert doc["provenance"] == {"seed": 0}


def test_monte_carlo_result_shape():
    cfg = _cfg(family={"generate": {"seed": 1, "n": 4, "d": 2}}, mode="stochastic", problem="CS", r=1,
               delay={"kind": "geometric", "p": 0.5}, schedule={"kind": "constant", "eta_fraction": 0.5},
               sigma=0.1, iterations=50, replications=5, box={"half_width": 3.0}, x0=[3.0, 3.0])
    mc = run_monte_carlo(cfg)
    assert mc.mean_sq.shape == (51,) and mc.replications == 5
    problem = ProblemInstance.from_config(cfg)
    assert mc.bound[0] == pytest.approx(float(np.sum((problem.x0 - problem.target) ** 2)))
    assert mc.mean_sq[0] == pytest.approx(mc.bound[0])
    assert mc.se[0] == 0.0
