import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from resilient_dgd import ResilientDGD
from resilient_dgd.costs import generate_family, line3


def test_params_and_clone():
    est = ResilientDGD(f=1, aggregator="cge", max_iter=50)
    params = est.get_params()
    assert params["f"] == 1 and params["aggregator"] == "cge" and params["max_iter"] == 50
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    assert est.set_params(r=1).r == 1


def test_fit_predict_score_on_line3():
    est = ResilientDGD(max_iter=2000).fit(line3())
    assert est.n_iter_ == 2000
    assert est.predict()[0] == pytest.approx(1.0, abs=1e-9)
    assert est.score(line3()) == pytest.approx(0.0, abs=1e-9)
    assert est.bounds_.variant == "thm1"


def test_fit_with_faults_and_stragglers():
    fam = generate_family(7, 6, 2, spread=0.1, eig_low=1.0, eig_high=1.05)
    est = ResilientDGD(f=1, r=1, mode="async", aggregator="cge", roles=["reverse"] + ["honest"] * 5,
                       delay={"kind": "slow", "agents": [5], "extra": None}, max_iter=5000, box=5.0)
    est.fit(fam)
    assert np.linalg.norm(est.coef_ - est.target_) <= est.bounds_.D
    assert -est.score(fam) == pytest.approx(np.linalg.norm(est.coef_ - est.target_))


def test_fit_accepts_dict_and_box_pair():
    fam = generate_family(2, 3, 2)
    est = ResilientDGD(max_iter=100, box=([-3.0, -3.0], [3.0, 3.0])).fit(fam.to_dict())
    assert est.coef_.shape == (2,)


def test_unfitted_estimator_raises():
    with pytest.raises(NotFittedError):
        ResilientDGD().predict()


def test_fit_is_deterministic():
    fam = generate_family(3, 5, 2)
    kw = dict(mode="stochastic", problem="CS", r=1, delay={"kind": "geometric", "p": 0.5}, sigma=0.3,
              schedule="constant", max_iter=200, box=5.0, random_state=11)
    a = ResilientDGD(**kw).fit(fam).coef_
    b = ResilientDGD(**kw).fit(fam).coef_
    assert a.tobytes() == b.tobytes()
