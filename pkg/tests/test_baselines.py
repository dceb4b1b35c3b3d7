import numpy as np
import pytest
from pydantic import ValidationError

from peerfx_kit.datamodel.run_config import EstimationSettings
from peerfx_kit.datamodel.sem_params import Nonlinearity, SemParams
from peerfx_kit.datamodel.specs import (
    DatasetSpec,
    EstimatorName,
    GraphModel,
    GraphSpec,
    InstrumentSource,
    LinearIvSpec,
)
from peerfx_kit.datamodel.train_config import TrainConfig
from peerfx_kit.estimators import (
    CollinearityError,
    UnknownEstimatorError,
    WeakInstrumentError,
    WeakInstrumentWarning,
    dl_2sls,
    least_squares,
    loo_instruments,
    naive_ols,
    parse_estimator,
    run_estimator,
    supported_estimators,
    tsls,
    with_intercept,
)
from peerfx_kit.graph import from_edge_list, remove_node_edges, second_order
from peerfx_kit.simulate import dataset_from_spec, gen_graph, preprocess_ig


def test_least_squares_exact_line():
    coef = least_squares([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
    np.testing.assert_allclose(coef, [2.0], atol=1e-14)


def test_least_squares_orthogonal_target():
    coef = least_squares([[1.0], [0.0]], [0.0, 5.0])
    np.testing.assert_allclose(coef, [0.0], atol=1e-14)


def test_least_squares_matches_qr(rng):
    D = rng.standard_normal((50, 5))
    y = rng.standard_normal(50)
    Q, R = np.linalg.qr(D)
    expected = np.linalg.solve(R, Q.T @ y)
    np.testing.assert_allclose(least_squares(D, y), expected, atol=1e-8)


def test_least_squares_collinear_design(rng):
    x = rng.standard_normal(20)
    with pytest.raises(CollinearityError):
        least_squares(np.column_stack([x, 2 * x]), rng.standard_normal(20))
    # A ridge makes the system solvable
    assert least_squares(np.column_stack([x, 2 * x]), x, ridge=1e-3).shape == (2,)


def test_least_squares_needs_enough_rows():
    with pytest.raises(CollinearityError, match="rows"):
        least_squares(np.ones((2, 3)), np.ones(2))


def test_with_intercept_appends_constant():
    design = with_intercept([1.0, 2.0], np.array([[3.0], [4.0]]))
    np.testing.assert_array_equal(design, [[1.0, 3.0, 1.0], [2.0, 4.0, 1.0]])


def test_loo_path_graph_focal_center(path_graph):
    X = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(loo_instruments(path_graph, X)[1], [0.0])


def test_loo_isolated_focal_matches_second_order():
    G = from_edge_list([(0, 1), (1, 2)], 4)
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    np.testing.assert_array_equal(loo_instruments(G, X)[3], second_order(G, X)[3])


def test_loo_triangle_focal_node(triangle_graph):
    X = np.array([[1.0, 0.0], [2.0, 5.0], [4.0, 7.0]])
    np.testing.assert_allclose(loo_instruments(triangle_graph, X)[0], [3.0, 6.0])


def test_loo_matches_brute_force(rng):
    G = gen_graph(40, GraphModel.ERDOS_RENYI, 0.1, seed=3)
    X = rng.standard_normal((40, 2))
    fast = loo_instruments(G, X)
    dense = G.to_dense()
    for i in range(G.n):
        reduced = remove_node_edges(G, i).to_dense()
        np.testing.assert_allclose(fast[i], dense[i] @ (reduced @ X), atol=1e-12)


def test_loo_node_subset(rng):
    G = gen_graph(30, GraphModel.ERDOS_RENYI, 0.15, seed=1)
    X = rng.standard_normal((30, 2))
    np.testing.assert_array_equal(loo_instruments(G, X, nodes=[4, 2]), loo_instruments(G, X)[[4, 2]])


def test_loo_locality(rng):
    # Path 0-1-...-9; nodes 7 and 9 are at distance >= 3 from node 1
    edges = [(i, i + 1) for i in range(9)]
    X = rng.standard_normal((10, 1))
    before = loo_instruments(from_edge_list(edges, 10), X)[1]
    after = loo_instruments(from_edge_list(edges + [(7, 9)], 10), X)[1]
    np.testing.assert_array_equal(before, after)


def _linear_dataset(
    n, lambda_u, seed, beta=0.5, leak=0.0, p=None, nonlinearity=Nonlinearity.LINEAR
):
    spec = DatasetSpec(
        graph=GraphSpec(model=GraphModel.ERDOS_RENYI, n=n, p=p or 10.0 / n),
        d=2,
        params=SemParams(
            beta=beta, lambda_u=lambda_u, instrument_leak=leak, nonlinearity=nonlinearity
        ),
    )
    return dataset_from_spec(spec, seed)


def test_tsls_matches_two_step_normal_equations():
    ds = _linear_dataset(30, 1.0, seed=2, p=0.25)
    result = tsls(ds, LinearIvSpec())

    data = preprocess_ig(ds)
    ones = np.ones((ds.n, 1))
    stage1 = np.hstack([data.X_G2, data.X_G, data.X, ones])
    gamma = np.linalg.solve(stage1.T @ stage1, stage1.T @ data.Y_G)
    stage2 = np.hstack([(stage1 @ gamma)[:, None], data.X_G, data.X, ones])
    coef = np.linalg.solve(stage2.T @ stage2, stage2.T @ data.Y)

    assert result.pe_hat == pytest.approx(coef[0], abs=1e-8)
    assert result.estimator == "2sls" and result.label == "2SLS"
    assert result.diagnostics.n_instruments == 2


def test_tsls_weak_instrument_path():
    ds = _linear_dataset(200, 1.0, seed=0)
    spec = LinearIvSpec(instrument_source=InstrumentSource.FIRST_ORDER_MEAN)
    with pytest.warns(WeakInstrumentWarning):
        with pytest.raises(WeakInstrumentError):
            tsls(ds, spec)


def test_fn_iv_drops_neighbor_controls():
    ds = _linear_dataset(300, 1.0, seed=1)
    result = run_estimator(EstimatorName.FN_IV, ds, EstimationSettings(), seed=0)
    assert result.label == "FN-IV"
    assert result.config["control_neighbor"] is False
    assert "FN-IV design is just identified" not in result.diagnostics.warnings


def test_fn_iv_single_feature_is_just_identified():
    spec = DatasetSpec(
        graph=GraphSpec(model=GraphModel.ERDOS_RENYI, n=300, p=0.03), d=1
    )
    ds = dataset_from_spec(spec, 0)
    result = run_estimator("fn-iv", ds, EstimationSettings())
    assert "FN-IV design is just identified" in result.diagnostics.warnings


def test_loo_estimator_runs(small_dataset):
    result = run_estimator("loo", small_dataset, EstimationSettings(), seed=3)
    assert result.label == "LOO" and result.seed == 3
    assert np.isfinite(result.pe_hat)


def test_naive_without_transform_differs(small_dataset):
    a = naive_ols(small_dataset, use_ig=True)
    b = naive_ols(small_dataset, use_ig=False)
    assert a.pe_hat != b.pe_hat
    assert a.diagnostics.use_ig and not b.diagnostics.use_ig
    np.testing.assert_array_equal(a.per_node_pe, a.pe_hat)


def test_transform_flag_lives_in_estimation_settings(small_dataset):
    with pytest.raises(ValidationError):
        LinearIvSpec(use_ig=False)

    plain = tsls(small_dataset, use_ig=False)
    assert not plain.diagnostics.use_ig
    assert plain.pe_hat != tsls(small_dataset).pe_hat

    via_settings = run_estimator("2sls", small_dataset, EstimationSettings(use_ig=False))
    assert not via_settings.diagnostics.use_ig
    assert via_settings.pe_hat == pytest.approx(plain.pe_hat, rel=1e-12)


def test_dl_2sls_is_deterministic(small_dataset, fast_settings):
    a = dl_2sls(small_dataset, fast_settings.stage1, fast_settings.stage2, seed=2)
    b = dl_2sls(small_dataset, fast_settings.stage1, fast_settings.stage2, seed=2)
    assert a.model_dump() == b.model_dump()
    assert a.label == "DL-2SLS"
    assert a.pe_hat == float(np.mean(a.per_node_pe))


def test_estimator_registry():
    assert supported_estimators() == ["naive", "2sls", "fn-iv", "loo", "dl2sls", "dig2rsi"]
    assert parse_estimator(" DIG2RSI ") == EstimatorName.DIG2RSI
    with pytest.raises(UnknownEstimatorError, match="Supported estimators: naive"):
        parse_estimator("ces")


@pytest.mark.slow
def test_naive_recovers_beta_without_confounding():
    estimates = [naive_ols(_linear_dataset(5000, 0.0, seed)).pe_hat for seed in range(5)]
    assert abs(np.mean(estimates) - 0.5) < 0.05


@pytest.mark.slow
def test_naive_is_biased_upwards_under_confounding():
    estimates = [naive_ols(_linear_dataset(5000, 1.0, seed)).pe_hat for seed in range(5)]
    assert np.mean(estimates) > 0.5


@pytest.mark.slow
def test_naive_null_effect():
    estimates = [
        naive_ols(_linear_dataset(5000, 0.0, seed, beta=0.0)).pe_hat for seed in range(5)
    ]
    assert abs(np.mean(estimates)) < 0.05


@pytest.mark.slow
def test_tsls_beats_naive_under_confounding():
    tsls_bias, naive_bias = [], []
    for seed in range(5):
        ds = _linear_dataset(5000, 1.0, seed)
        tsls_bias.append(tsls(ds).abs_bias)
        naive_bias.append(naive_ols(ds).abs_bias)
    assert np.mean(tsls_bias) < 0.1
    assert np.mean(tsls_bias) < np.mean(naive_bias)


@pytest.mark.slow
def test_tsls_recovers_beta_on_unconfounded_data():
    estimates = [tsls(_linear_dataset(2000, 0.0, seed)).pe_hat for seed in range(5)]
    assert 0.45 <= np.mean(estimates) <= 0.55


@pytest.mark.slow
def test_instrument_leak_increases_tsls_bias():
    clean = [tsls(_linear_dataset(3000, 1.0, seed)).abs_bias for seed in range(5)]
    leaky = [tsls(_linear_dataset(3000, 1.0, seed, leak=1.0)).abs_bias for seed in range(5)]
    assert np.mean(leaky) > np.mean(clean)


def _deep_settings():
    stage1 = TrainConfig(lr=1e-3, epochs=60, batch_size=128, hidden=(64, 64), batchnorm=True, dropout=0.1)
    stage2 = TrainConfig(lr=1e-3, epochs=60, batch_size=128, hidden=(64, 64), batchnorm=False, dropout=0.0)
    return EstimationSettings(stage1=stage1, stage2=stage2)


@pytest.mark.slow
def test_unconfounded_recovery_of_iv_estimators():
    settings = _deep_settings()
    biases = {"2sls": [], "dl2sls": [], "dig2rsi": []}
    for seed in range(5):
        ds = _linear_dataset(2000, 0.0, seed)
        for name, values in biases.items():
            values.append(run_estimator(name, ds, settings, seed=seed).abs_bias)
    for name, values in biases.items():
        assert np.mean(values) < 0.08, name


@pytest.mark.slow
def test_estimator_ordering_under_nonlinear_confounding():
    settings = _deep_settings()
    biases = {name: [] for name in supported_estimators()}
    for seed in range(5):
        ds = _linear_dataset(3000, 1.0, seed, nonlinearity=Nonlinearity.NONLINEAR)
        for name, values in biases.items():
            values.append(run_estimator(name, ds, settings, seed=seed).abs_bias)
    mean = {name: float(np.mean(values)) for name, values in biases.items()}

    assert mean["naive"] > mean["2sls"]
    assert mean["dig2rsi"] <= mean["dl2sls"]
    assert mean["dig2rsi"] == min(mean.values())
