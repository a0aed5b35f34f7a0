import json
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

import edgemle as e
from edgemle.montecarlo import _run_block


def test_sample_iid_is_deterministic(logistic_model):
    a = e.sample_iid(logistic_model, 100, 12345)
    b = e.sample_iid(logistic_model, 100, 12345)
    assert np.array_equal(a, b)
    c = e.sample_iid(logistic_model, 100, 12346)
    assert not np.array_equal(a, c)


def test_sample_iid_empty(logistic_model):
    assert e.sample_iid(logistic_model, 0, 1).size == 0


def test_sample_iid_matches_model_distribution(logistic_model):
    # aggregate 40 replicates of n=500; KS statistic against the model CDF
    # must sit below the alpha = 0.001 critical value 1.9495/sqrt(N)
    draws = np.concatenate([e.sample_iid(logistic_model, 500, 90 ^ r) for r in range(40)])
    stat = stats.kstest(draws, logistic_model.cdf).statistic
    assert stat < 1.9495 / math.sqrt(draws.size)


def test_sample_iid_student_t(t7_model):
    draws = np.concatenate([e.sample_iid(t7_model, 500, 17 ^ r) for r in range(20)])
    stat = stats.kstest(draws, t7_model.cdf).statistic
    assert stat < 1.9495 / math.sqrt(draws.size)


# ---------------------------------------------------------------------------
# ecdf distance
# ---------------------------------------------------------------------------

def test_ecdf_distance_of_own_values_is_zero():
    sample = np.array([0.3, 1.2, 2.0, 2.2])
    grid = np.array([0.5, 1.5, 2.1])
    ecdf_at = np.searchsorted(np.sort(sample), grid, side="right") / sample.size
    sup, l1 = e.ecdf_distance(sample, ecdf_at, grid)
    assert sup == 0.0 and l1 == 0.0


def test_ecdf_distance_point_mass_straddles_half():
    sup, l1 = e.ecdf_distance(np.array([0.0]), lambda g: ndtr(g), np.array([0.0]))
    assert sup == pytest.approx(0.5)
    assert l1 == pytest.approx(0.5)


def test_ecdf_distance_two_independent_ecdfs_within_dkw():
    m = 100_000
    a = np.sort(e.sample_iid(e.logistic(), m, 1))
    b = np.sort(e.sample_iid(e.logistic(), m, 2))
    grid = np.linspace(-6, 6, 241)
    ecdf_b = np.searchsorted(b, grid, side="right") / m
    sup, _ = e.ecdf_distance(a, ecdf_b, grid)
    assert sup <= 0.02  # two-sample DKW at far beyond 1 - 1e-6 confidence


def test_ecdf_distance_validates_grid():
    with pytest.raises(ValueError):
        e.ecdf_distance([1.0], lambda g: g, [])


# ---------------------------------------------------------------------------
# replicates and blocks
# ---------------------------------------------------------------------------

def test_block_rows_match_single_replicates(logistic_model, logistic_moments):
    desc = json.dumps(logistic_model.descriptor(), sort_keys=True)
    a = tuple(float(v) for v in logistic_moments.a)
    block = _run_block((desc, 30, 0, 6, 4242, a, logistic_moments.fisher,
                        e.ORDERS, 1e-11))
    for r in range(6):
        rep = e.replicate(logistic_model, logistic_moments, 30, 4242 ^ r, tol=1e-11)
        assert block["theta"][r] == rep.theta_hat
        assert block["standardized"][r] == rep.standardized
        for i, k in enumerate(e.ORDERS):
            assert block["gamma"][r, i] == rep.remainders[k]


def test_replication_result_normal_remainders_are_solver_noise(normal_model, normal_moments):
    rep = e.replicate(normal_model, normal_moments, 50, 7, tol=1e-12)
    for k, gamma in rep.remainders.items():
        assert abs(gamma) < 1e-10, k


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        e.SimulationConfig(replications=50)
    with pytest.raises(ValueError):
        e.SimulationConfig(n_grid=(100, 50))
    with pytest.raises(ValueError):
        e.SimulationConfig(orders=(0, 1))
    with pytest.raises(ValueError):
        e.SimulationConfig.from_dict({"unknown_key": 1})


def test_config_round_trip():
    cfg = e.SimulationConfig(family="normal", n_grid=(25, 50), replications=200)
    again = e.SimulationConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_epsilon_threshold_matches_definition():
    cfg = e.SimulationConfig(replications=200, epsilon_exponent=0.5)
    n = 50
    expected = math.log(n) ** 2.5 / math.sqrt(n) / n**2
    assert cfg.epsilon_threshold(n) == pytest.approx(expected, rel=1e-15)
    # the side condition eps_n sqrt(n) / log(n)^2 grows along the grid
    side = [cfg.epsilon_threshold(m) * m**2 * math.sqrt(m) / math.log(m) ** 2
            for m in (25, 100, 400, 1600)]
    assert all(b > a for a, b in zip(side, side[1:]))


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def normal_study(tmp_path_factory):
    cfg = e.SimulationConfig(family="normal", n_grid=(25, 50), replications=512,
                             base_seed=321, solver_tol=1e-12)
    out = tmp_path_factory.mktemp("normal_study")
    report = e.run_study(cfg, out_dir=out, workers=1)
    return report


def test_normal_study_is_an_identity_test(normal_study):
    for n in ("25", "50"):
        stats_n = normal_study.per_n[n]
        assert stats_n["solver_failures"] == 0
        for k in map(str, e.ORDERS):
            assert stats_n["remainders"][k]["max_abs"] < 1e-9
        sups = [stats_n["ecdf_distance"][k]["sup"] for k in map(str, e.ORDERS)]
        assert max(sups) - min(sups) < 2e-9


def test_normal_study_tail_fractions_are_zero(normal_study):
    for n in ("25", "50"):
        assert normal_study.per_n[n]["tail"]["fraction"] == 0.0


def test_study_outputs_are_worker_independent(tmp_path):
    cfg = e.SimulationConfig(family="logistic", n_grid=(25,), replications=512,
                             base_seed=77)
    r1 = e.run_study(cfg, out_dir=tmp_path / "w1", workers=1)
    r2 = e.run_study(cfg, out_dir=tmp_path / "w2", workers=2)
    for name in ("report.json", "remainders_25.csv", "ecdf_25.csv", "curves.csv"):
        b1 = (tmp_path / "w1" / name).read_bytes()
        b2 = (tmp_path / "w2" / name).read_bytes()
        assert b1 == b2, name


def test_study_rejects_family_failing_conditions():
    cfg = e.SimulationConfig(
        family="expression",
        family_params={"expr": "sqrt(2/pi)*x**2*exp(-x**2/2)",
                       "support": [0, 1e309], "name": "xsq"},
        n_grid=(25,), replications=100)
    with pytest.raises(e.StudyAborted):
        e.run_study(cfg)


def test_study_report_structure(normal_study):
    d = normal_study.to_dict()
    assert set(d) == {"config", "fisher", "moments", "dkw_noise_floor", "per_n",
                      "slopes", "tail_trend"}
    assert d["dkw_noise_floor"]["value"] == pytest.approx(1.3581 / math.sqrt(512), rel=1e-6)
    assert all(set(v) == {"slope", "expected"} for v in d["slopes"].values())
