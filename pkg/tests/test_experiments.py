import json
import math

import numpy as np
import pytest

from phlab import dynamics as dyn
from phlab import experiments as ex
from phlab.errors import NonConvergentOrbits


class TwoBasins:
    """Cat map on the first two coordinates times a circle map with two sinks.

    The third coordinate converges to 1/4 from (0, 1/2) and to 3/4 from
    (1/2, 1), so there are exactly two physical measures.
    """

    dim = 3

    def evaluate(self, X):
        X = np.asarray(X, float)
        x, y, t = X[..., 0], X[..., 1], X[..., 2]
        out = np.stack([2 * x + y, x + y, t + 0.5 * np.sin(4 * np.pi * t) / (4 * np.pi)], axis=-1)
        return out % 1.0


SMALL = dict(ensemble=32, orbit_length=2000, resolution=8, ht_horizon=100, block_samples=64)
# basins are 1/2 apart, so the threshold 5/g needs g = 16
TOY = dict(SMALL, resolution=16)


def test_config_validation():
    with pytest.raises(ValueError):
        ex.ExperimentConfig(sweep=(0.02, 0.0))
    with pytest.raises(ValueError):
        ex.ExperimentConfig(ensemble=0)
    with pytest.raises(ValueError):
        ex.ExperimentConfig(sigma=1.5)
    cfg = ex.ExperimentConfig()
    assert cfg.threshold == 5 / 16
    assert json.loads(json.dumps(cfg.as_dict()))["matrix"] == [[1, 1, 0], [1, 2, 1], [0, 1, 2]]


def test_two_basins_counted():
    cfg = ex.ExperimentConfig(**TOY)
    res = ex.physical_measure_count(TwoBasins(), cfg, check_exponents=False)
    assert res.count == 2
    assert sum(res.sizes) == 32
    X = ex.initial_ensemble(cfg, 3)
    side = (X[:, 2] > 0.5).astype(int)
    labels = np.array(res.labels)
    # the partition follows the basins
    assert len({(s, l) for s, l in zip(side, labels)}) == 2
    assert set(res.sensitivity) == {0.5, 1.0, 2.0}


def test_linear_single_measure():
    cfg = ex.ExperimentConfig(family="linear", **SMALL)
    res = ex.physical_measure_count(cfg.spec(0.0), cfg)
    assert res.count == 1 and res.stray_fraction == 0.0


def _partition(labels, X):
    groups = {}
    for lab, x in zip(labels, map(tuple, X)):
        groups.setdefault(lab, set()).add(x)
    return sorted(sorted(g) for g in groups.values())


def test_order_invariance():
    cfg = ex.ExperimentConfig(**TOY)
    spec = TwoBasins()
    X = ex.initial_ensemble(cfg, 3)
    H = ex.ensemble_measures(spec, X, cfg)
    perm = np.random.default_rng(9).permutation(X.shape[0])
    a = ex.physical_measure_count(spec, cfg, X=X, H=H, check_exponents=False)
    b = ex.physical_measure_count(spec, cfg, X=X[perm], H=H[perm], check_exponents=False)
    assert a.count == b.count
    assert _partition(a.labels, X) == _partition(b.labels, X[perm])


def test_doubling_the_ensemble():
    cfg = ex.ExperimentConfig(**TOY)
    spec = TwoBasins()
    X = ex.initial_ensemble(cfg, 3)
    X2 = np.concatenate([X, X])
    assert ex.physical_measure_count(spec, cfg, X=X2, check_exponents=False).count == 2


def test_ensemble_too_small():
    cfg = ex.ExperimentConfig(**SMALL)
    with pytest.raises(ValueError):
        ex.physical_measure_count(TwoBasins(), cfg, X=np.random.default_rng(0).random((8, 3)))


def test_non_convergent_orbits():
    cfg = ex.ExperimentConfig(exponent_tol=1e-9, **SMALL)
    with pytest.raises(NonConvergentOrbits):
        ex.physical_measure_count(cfg.spec(0.02), cfg)


def test_generic_histograms_match_mapspec():
    cfg = ex.ExperimentConfig(**SMALL)
    spec = dyn.MapSpec("da", epsilon=0.01)

    class Wrapped:
        dim = 3

        def evaluate(self, X):
            return dyn.evaluate(spec, X)

    X = ex.initial_ensemble(cfg, 3)[:4]
    assert np.array_equal(ex.ensemble_measures(spec, X, cfg), ex.ensemble_measures(Wrapped(), X, cfg))


@pytest.fixture(scope="module")
def small_report():
    return ex.stability_sweep(ex.ExperimentConfig(sweep=(0.0, 0.02), **SMALL))


def test_sweep_small(small_report):
    rep = small_report
    assert rep.ok
    assert rep.rows[0].w1 == 0.0
    assert rep.rows[1].w1 > 0.0
    assert rep.column("count") == [1, 1]
    assert set(rep.measures) == {0.0, 0.02}
    assert 0 < rep.sigma < 1 and rep.sigma_floor > 0
    body = json.loads(rep.to_json())
    assert body["provenance"]["master_seed"] == 0
    assert len(body["rows"]) == 2


def test_sweep_deterministic(small_report):
    again = ex.stability_sweep(ex.ExperimentConfig(sweep=(0.0, 0.02), **SMALL))
    assert again.to_json() == small_report.to_json()


def test_sweep_error_rows():
    rep = ex.stability_sweep(ex.ExperimentConfig(sweep=(0.0, 0.02), exponent_tol=1e-9, **SMALL))
    assert not rep.ok
    assert rep.rows[0].error == ""
    assert rep.rows[1].error.startswith("NonConvergentOrbits")
    assert math.isnan(rep.rows[1].w1)
    assert json.loads(rep.to_json())["rows"][1]["w1"] is None


def test_sweep_requires_zero():
    with pytest.raises(ValueError):
        ex.stability_sweep(ex.ExperimentConfig(sweep=(0.01,), **SMALL))


def test_ht_frequency_rows():
    cfg = ex.ExperimentConfig(ells=(1, 4), **SMALL)
    rows = ex.ht_frequency_vs_ell(cfg, epsilon=0.02)
    assert [r["ell"] for r in rows] == [1, 4]
    for r in rows:
        assert 0 <= r["p05_frequency"] <= r["mean_frequency"] <= 1
        assert r["sigma_ok"]
        assert 0 <= r["block_fraction"] <= 1
