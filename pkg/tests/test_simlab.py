import math

import numpy as np
import pytest

from efs import simlab as S
from efs.greedy import orthonormal_design


def small_config(**kw):
    base = dict(n=60, p=8, rho=0.3, s=3, snr=1.0, k_max=4, B=10, m_grid=(2, 8), folds=3, seed=1, replicates=4)
    base.update(kw)
    return S.ExperimentConfig(**base)


class TestBandedDesign:
    def test_independent_columns(self):
        n = 4000
        d = S.gen_banded_gaussian(n, 5, 0.0, seed=3)
        c = np.corrcoef(d.X, rowvar=False)
        assert np.max(np.abs(c - np.eye(5))) < 4 / math.sqrt(n)

    def test_lag_one_correlation(self):
        d = S.gen_banded_gaussian(10**5, 3, 0.5, seed=0)
        c = np.corrcoef(d.X, rowvar=False)
        assert abs(c[0, 1] - 0.5) < 0.01
        assert abs(c[0, 2] - 0.25) < 0.01

    def test_normalized_and_reproducible(self):
        a = S.gen_banded_gaussian(50, 6, 0.5, seed=9)
        b = S.gen_banded_gaussian(50, 6, 0.5, seed=9)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_allclose(np.mean(a.X**2, axis=0), 1.0, atol=1e-12)

    @pytest.mark.parametrize("rho", [1.0, 1.2, -0.1])
    def test_rejects_rho(self, rho):
        with pytest.raises(ValueError):
            S.gen_banded_gaussian(10, 3, rho)


class TestCalibration:
    def test_quadratic_form_by_summation(self):
        beta = np.zeros(50)
        beta[:10] = 1.0
        direct = 10 + 2 * sum((10 - d) * 0.5**d for d in range(1, 10))
        assert S.banded_quadratic_form(beta, 0.5) == direct == 26.00390625
        assert S.calibrate_sigma2(beta, (0.5, 50), 0.25) == pytest.approx(104.015625, abs=1e-12)

    def test_matches_dense_matrix(self):
        rng = np.random.default_rng(2)
        beta = rng.normal(size=12) * (rng.random(12) < 0.5)
        sigma = 0.7 ** np.abs(np.subtract.outer(np.arange(12), np.arange(12)))
        assert S.banded_quadratic_form(beta, 0.7) == pytest.approx(beta @ sigma @ beta, rel=1e-13)

    def test_identity_covariance(self):
        beta = np.zeros(9)
        beta[:4] = 1.0
        assert S.calibrate_sigma2(beta, (0.0, 9), 1.0) == 4.0

    def test_rejects(self):
        with pytest.raises(ValueError):
            S.calibrate_sigma2(np.zeros(5), (0.5, 5), 1.0)
        with pytest.raises(ValueError):
            S.calibrate_sigma2(np.ones(5), (0.5, 5), 0.0)
        with pytest.raises(ValueError):
            S.calibrate_sigma2(np.ones(4), (0.5, 5), 1.0)

    def test_round_trip_snr(self):
        n, p, rho, snr = 10**5, 20, 0.5, 0.25
        beta = np.zeros(p)
        beta[:10] = 1.0
        sigma2 = S.calibrate_sigma2(beta, (rho, p), snr)
        d = S.gen_banded_gaussian(n, p, rho, seed=4)
        signal = np.mean((d.X @ beta) ** 2)
        assert abs(signal / sigma2 - snr) / snr < 0.05


class TestGridAndFolds:
    def test_geometric_grid(self):
        g = S.geometric_grid(50)
        assert g[0] == 2 and g[-1] == 50 and g == sorted(set(g))
        raw = np.round(np.exp(np.linspace(math.log(2), math.log(100), 12))).astype(int)
        assert S.geometric_grid(100) == sorted(set(raw.tolist()))
        assert S.geometric_grid(2) == [2]

    def test_folds_partition(self):
        parts = S.fold_indices(23, 5, seed=1)
        allrows = np.concatenate(parts)
        assert sorted(allrows.tolist()) == list(range(23))
        assert {len(p) for p in parts} <= {4, 5}

    def test_fold_rejections(self):
        with pytest.raises(ValueError):
            S.fold_indices(3, 4)
        with pytest.raises(ValueError):
            S.fold_indices(10, 1)


class TestCrossValidation:
    def test_singleton_grid(self):
        d = S.gen_banded_gaussian(40, 6, 0.2, seed=0)
        y = d.X[:, 0] + np.random.default_rng(0).normal(size=40)
        assert S.cv_select_m(d, y, 2, [6], 5, 4, seed=0) == 6

    def test_same_seed_same_choice(self):
        d = S.gen_banded_gaussian(40, 6, 0.2, seed=0)
        y = d.X[:, 0] + np.random.default_rng(0).normal(size=40)
        a = S.cv_errors(d, y, 3, [2, 4, 6], 8, 4, seed=3)
        b = S.cv_errors(d, y, 3, [2, 4, 6], 8, 4, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_ties_go_to_smaller_m(self):
        d = orthonormal_design(20, 4, seed=0)
        # zero response: every m predicts 0 and ties exactly
        assert S.cv_select_m(d, np.zeros(20), 2, [4, 3, 1], 5, 4, seed=0) == 1

    def test_strong_sparse_signal_prefers_large_m(self):
        p, k = 10, 3
        d = orthonormal_design(40, p, seed=1)
        y = d.X[:, :k].sum(axis=1) * 5
        grid = S.geometric_grid(p)
        median = float(np.median(grid))
        picks = [S.cv_select_m(d, y, k, grid, 20, 5, seed=s) for s in range(50)]
        assert np.mean([m >= median for m in picks]) >= 0.8


class TestConfig:
    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ValueError, match="unknown"):
            S.ExperimentConfig.from_dict({"n": 10, "bogus": 1})

    @pytest.mark.parametrize(
        "kw", [dict(rho=1.0), dict(snr=0.0), dict(folds=1), dict(m_grid=(0, 3)), dict(m_grid=()), dict(s=0), dict(k_max=9)]
    )
    def test_invariants(self, kw):
        with pytest.raises(ValueError):
            small_config(**kw)

    def test_default_grid(self):
        assert S.ExperimentConfig().grid() == S.geometric_grid(50)


class TestRunExperiment:
    def test_rows_and_csv(self):
        res = S.run_experiment(small_config())
        assert len(res.rows) == 8
        assert {(r.k, r.method) for r in res.rows} == {(k, m) for k in range(1, 5) for m in ("FS", "EFS")}
        assert all(r.df_se > 0 and r.train_mse_se > 0 for r in res.rows)
        text = res.to_csv()
        assert text.splitlines()[0] == "k,method,chosen_m,df,df_se,train_mse,train_mse_se"
        first = text.splitlines()[1].split(",")
        assert float(first[3]) == res.rows[0].df

    def test_reproducible(self):
        a = S.run_experiment(small_config()).to_csv()
        b = S.run_experiment(small_config()).to_csv()
        assert a == b

    def test_full_subsample_duplicates_fs(self):
        res = S.run_experiment(small_config(B=1, m_grid=(8,)))
        for k in range(1, 5):
            fs, efs = res.row(k, "FS"), res.row(k, "EFS")
            assert (fs.df, fs.train_mse) == (efs.df, efs.train_mse)
            assert efs.chosen_m == 8


@pytest.mark.slow
def test_paper_scale_low_snr_advantage():
    # the paper's own scale (n=1000, p=100, B=500); the reduced scale is in the acceptance suite
    res = S.run_experiment(S.ExperimentConfig(n=1000, p=100, snr=0.25, B=500, replicates=10, seed=0))
    wins = [res.row(k, "EFS").df <= res.row(k, "FS").df and res.row(k, "EFS").train_mse <= res.row(k, "FS").train_mse for k in range(1, 21)]
    assert np.mean(wins) >= 0.8
