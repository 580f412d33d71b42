"""OLS and clustered covariance checked against independent oracles."""

import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from synth import synth_rows_small

from buzzcheck.errors import NotEnoughRows, RankDeficient, SingleCluster
from buzzcheck.estimate import clip_psd, fit_ols, mispricing_table, sandwich
from buzzcheck.features import FE_SEASON, PM, PM_NO_RD, DesignMatrix, build_design


def _design(X, y, tournament=None, match=None, n_core=None):
    n = len(y)
    return DesignMatrix(
        response=np.asarray(y, float),
        X=np.asarray(X, float),
        columns=tuple(f"x{k}" for k in range(X.shape[1])),
        n_core=n_core or X.shape[1],
        tournament=np.arange(n) if tournament is None else np.asarray(tournament),
        match=np.arange(n) if match is None else np.asarray(match),
    )


def _small_train(synth_split, n=200):
    train, _ = synth_split
    rows = [r for r in train if r.season in (2016, 2017)]
    return rows[:n]


def _normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)


# --- point estimates --------------------------------------------------------------------


@pytest.mark.parametrize("model", [PM, PM_NO_RD])
def test_ols_matches_normal_equations(synth_split, model):
    rows = _small_train(synth_split)
    d = build_design(rows, model, (FE_SEASON,))
    fit = fit_ols(d)
    oracle = _normal_equations(d.X, d.response)
    np.testing.assert_allclose(fit.params, oracle, rtol=0, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=12, max_value=200))
def test_ols_oracle_on_random_designs(seed, n):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.uniform(0.05, 0.95, n), rng.normal(0, 0.1, n), rng.normal(0, 1, n)])
    y = rng.integers(0, 2, n) - X[:, 1]
    fit = fit_ols(_design(X, y), covariance=False)
    np.testing.assert_allclose(fit.params, _normal_equations(X, y), atol=1e-9)


def test_exactly_determined_line():
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    y = np.array([1.0, 3.0, 5.0])
    fit = fit_ols(_design(X, y), covariance=False)
    np.testing.assert_allclose(fit.params, [1.0, 2.0], atol=1e-12)
    assert np.abs(fit.residuals).max() < 1e-12


def test_not_enough_rows():
    X = np.eye(3)
    with pytest.raises(NotEnoughRows):
        fit_ols(_design(X, np.ones(3)))


def test_rank_deficient_fit():
    X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(RankDeficient):
        fit_ols(_design(X, np.arange(10.0)), covariance=False)


def test_residuals_centred_and_orthogonal(synth_split):
    d = build_design(synth_split[0])
    fit = fit_ols(d, covariance=False)
    assert abs(fit.residuals.mean()) < 1e-10
    assert np.abs(d.X.T @ fit.residuals).max() < 1e-8


def test_fixed_effects_match_within_transformation(synth_split):
    # Frisch-Waugh-Lovell: season dummies give the same slopes as season demeaning.
    train, _ = synth_split
    fit = fit_ols(build_design(train, PM, (FE_SEASON,)), covariance=False)
    seasons = np.array([r.season for r in train])
    Z = np.array([[r.z, r.rank_dist, r.wikibuzz] for r in train])
    e = np.array([r.e for r in train])
    for s in np.unique(seasons):
        m = seasons == s
        Z[m] -= Z[m].mean(axis=0)
        e[m] -= e[m].mean()
    slopes = np.linalg.lstsq(Z, e, rcond=None)[0]
    np.testing.assert_allclose([fit["z"], fit["rank_dist"], fit["wikibuzz"]], slopes, atol=1e-10)


def test_reported_constant_is_grand_intercept(synth_split):
    train, _ = synth_split
    fit = fit_ols(build_design(train), covariance=False)
    slopes = np.array([fit["z"], fit["rank_dist"], fit["wikibuzz"]])
    regressors = np.array([[r.z, r.rank_dist, r.wikibuzz] for r in train])
    e = np.array([r.e for r in train])
    assert fit.alpha_hat == pytest.approx(float((e - regressors @ slopes).mean()), abs=1e-12)
    # centred season effects average to zero over observations
    shares = {s: sum(r.season == int(s) for r in train) / len(train) for s in fit.fe_estimates["season"]}
    assert sum(shares[s] * v for s, v in fit.fe_estimates["season"].items()) == pytest.approx(0.0, abs=1e-12)


def test_row_order_does_not_change_estimates(synth_split):
    train, _ = synth_split
    perm = np.random.default_rng(0).permutation(len(train))
    a = fit_ols(build_design(train))
    b = fit_ols(build_design([train[i] for i in perm]))
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-12)
    np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-12)


def test_synthetic_buzz_effect_is_recovered(synth_split):
    fit = fit_ols(build_design(synth_split[0]))
    assert fit["wikibuzz"] > 0
    assert fit.p_of("wikibuzz") < 0.01


# --- covariance ---------------------------------------------------------------------------


def test_singleton_clusters_equal_hc1():
    rng = np.random.default_rng(1)
    n = 150
    X = np.column_stack([np.ones(n), rng.uniform(0.1, 0.9, n), rng.normal(size=n)])
    y = (rng.random(n) < X[:, 1]).astype(float) - X[:, 1]
    fit = fit_ols(_design(X, y))
    hc1 = sm.OLS(y, X).fit(cov_type="HC1").cov_params()
    np.testing.assert_allclose(fit.covariance, hc1, rtol=1e-10, atol=1e-14)


def test_one_way_matches_statsmodels_cluster(synth_split):
    d = build_design(_small_train(synth_split, 200))
    fit = fit_ols(d, covariance=False)
    V, counts = sandwich(d.X, fit.residuals, [d.tournament])
    groups = np.unique(d.tournament.astype(str), return_inverse=True)[1]
    ref = sm.OLS(d.response, d.X).fit(cov_type="cluster", cov_kwds={"groups": groups}).cov_params()
    np.testing.assert_allclose(V, ref, rtol=1e-9, atol=1e-14)
    assert counts == [len(set(d.tournament))]


def _brute_two_way(X, u, a, b):
    """Explicit-loop inclusion-exclusion with CR1 factors."""
    n, k = X.shape
    bread = np.linalg.inv(X.T @ X)

    def one(keys):
        groups = {}
        for i, g in enumerate(keys):
            groups.setdefault(g, np.zeros(k))
            groups[g] += X[i] * u[i]
        meat = sum(np.outer(s, s) for s in groups.values())
        G = len(groups)
        return G / (G - 1) * (n - 1) / (n - k) * bread @ meat @ bread

    return one(list(a)) + one(list(b)) - one(list(zip(a, b)))


def test_two_way_matches_loop_oracle():
    rng = np.random.default_rng(2)
    n = 180
    X = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
    y = X @ [0.1, 0.3, -0.2] + rng.normal(size=n)
    a = rng.integers(0, 9, n)  # crossed, not nested
    b = rng.integers(0, 13, n)
    fit = fit_ols(_design(X, y), covariance=False)
    V, counts = sandwich(X, fit.residuals, [a, b])
    np.testing.assert_allclose(V, _brute_two_way(X, fit.residuals, a, b), rtol=1e-10, atol=1e-14)
    assert counts == [9, 13]


def test_nested_matches_reduce_to_tournament_clustering(synth_split):
    d = build_design(synth_split[0])
    fit = fit_ols(d, covariance=False)
    two, _ = sandwich(d.X, fit.residuals, [d.tournament, d.match])
    one, _ = sandwich(d.X, fit.residuals, [d.tournament])
    np.testing.assert_allclose(two, one, rtol=1e-9, atol=1e-15)


def test_single_cluster_rejected():
    X = np.column_stack([np.ones(20), np.arange(20.0)])
    with pytest.raises(SingleCluster):
        fit_ols(_design(X, np.sin(np.arange(20.0)), tournament=np.zeros(20)))


def test_covariance_symmetric_psd(synth_split):
    fit = fit_ols(build_design(synth_split[0]))
    V = fit.covariance
    np.testing.assert_array_equal(V, V.T)
    assert np.linalg.eigvalsh(V).min() >= -1e-15
    assert fit.cluster_counts[0] == len({r.tournament_key for r in synth_split[0]})
    assert fit.df_resid == fit.cluster_counts[0] - 1


def test_clip_psd_floors_negative_eigenvalues():
    M = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    C = clip_psd(M)
    np.testing.assert_allclose(np.linalg.eigvalsh(C), [0.0, 3.0], atol=1e-12)
    np.testing.assert_array_equal(clip_psd(np.eye(2)), np.eye(2))


def test_p_values_use_t_with_cluster_df(synth_split):
    fit = fit_ols(build_design(synth_split[0]))
    t = fit["z"] / fit.se_of("z")
    assert fit.p_of("z") == pytest.approx(2 * stats.t.sf(abs(t), fit.df_resid))


def test_mispricing_table_order():
    rows = synth_rows_small(40)
    fit = fit_ols(build_design(list(rows), PM, ()))
    assert [r.name for r in mispricing_table(fit)] == ["z", "rank_dist", "wikibuzz", "const"]
