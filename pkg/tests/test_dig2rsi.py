import logging

import numpy as np
import pytest
from pydantic import ValidationError

from peerfx_kit.datamodel.result import bias_metrics
from peerfx_kit.datamodel.sem_params import Nonlinearity, SemParams
from peerfx_kit.datamodel.specs import DatasetSpec, GraphModel, GraphSpec
from peerfx_kit.datamodel.train_config import Stage2Config, TrainConfig
from peerfx_kit.estimators import (
    Stage2Model,
    Stage2Trainer,
    confounder_correlation,
    estimate_pe,
    naive_ols,
    run_dig2rsi,
    stage1_fit,
    stage2_fit,
)
from peerfx_kit.estimators.dig2rsi import build_stage2_model, stage2_inputs
from peerfx_kit.graph import from_edge_list
from peerfx_kit.nn import DenseLayer, Mlp, ModelError, Standardizer
from peerfx_kit.simulate import (
    build_dataset,
    dataset_from_spec,
    preprocess_ig,
    unexplained_exposure,
)


def _identity_model(head_weights, options=None):
    width = len(head_weights)
    extractor = Mlp([DenseLayer(np.eye(width), np.zeros(width))])
    head = Mlp([DenseLayer(np.asarray(head_weights)[:, None], np.zeros(1))])
    return Stage2Model(
        extractor=extractor,
        outcome_head=head,
        discriminator=Mlp.linear(width),
        lambda_a=0.0,
        options=options or Stage2Config(),
        input_scaler=Standardizer.identity(width),
        target_scaler=Standardizer.identity(),
        residual_scaler=Standardizer.identity(),
    )


def test_identity_extractor_reads_off_head_weight(path_graph):
    ds = build_dataset(path_graph, np.array([[1.0], [2.0], [3.0]]), np.array([0.5, 1.0, 2.0]))
    model = _identity_model([0.4, 0.1, 0.2, 0.3])
    result = estimate_pe(model, ds, v_hat=np.zeros(3))
    np.testing.assert_allclose(result.per_node_pe, 0.4, rtol=0, atol=1e-15)
    assert result.pe_hat == pytest.approx(0.4, abs=1e-15)
    assert result.pe_hat == float(np.mean(result.per_node_pe))
    assert result.true_beta is None and result.abs_bias is None


def test_estimate_pe_undoes_standardization(path_graph):
    ds = build_dataset(path_graph, np.array([[1.0], [2.0], [3.0]]), np.array([0.5, 1.0, 2.0]))
    model = _identity_model([0.4, 0.1, 0.2, 0.3])
    model.input_scaler = Standardizer(np.zeros(4), np.array([2.0, 1.0, 1.0, 1.0]))
    model.target_scaler = Standardizer(np.float64(1.0), np.float64(5.0))
    result = estimate_pe(model, ds, v_hat=np.zeros(3))
    assert result.pe_hat == pytest.approx(0.4 * 5.0 / 2.0)


def test_estimate_pe_rejects_width_mismatch(path_graph):
    ds = build_dataset(path_graph, np.ones((3, 2)), np.array([0.5, 1.0, 2.0]))
    model = _identity_model([0.4, 0.1, 0.2, 0.3])
    model.input_scaler = Standardizer.identity(6)
    with pytest.raises(ModelError, match="width"):
        estimate_pe(model, ds, v_hat=np.zeros(3))


def test_heads_must_match_extractor_width():
    with pytest.raises(ValidationError):
        Stage2Model(
            extractor=Mlp.build(4, (), 3),
            outcome_head=Mlp.linear(2),
            discriminator=Mlp.linear(3),
            lambda_a=0.0,
            input_scaler=Standardizer.identity(4),
            target_scaler=Standardizer.identity(),
            residual_scaler=Standardizer.identity(),
        )


@pytest.mark.parametrize(
    "pe_hat, beta, abs_bias, rel_bias",
    [(0.3311, 0.5, 0.1689, 33.78), (0.5, 0.5, 0.0, 0.0), (0.7, -0.5, 1.2, 240.0)],
)
def test_bias_metrics(pe_hat, beta, abs_bias, rel_bias):
    got_abs, got_rel = bias_metrics(pe_hat, beta)
    assert got_abs == pytest.approx(abs_bias, abs=1e-12)
    assert got_rel == pytest.approx(rel_bias, abs=1e-9)


def test_relative_bias_undefined_at_zero_beta():
    assert bias_metrics(0.1, 0.0) == (0.1, None)


def test_stage1_residual_identity(small_dataset, fast_settings):
    data = preprocess_ig(small_dataset)
    out = stage1_fit(data, fast_settings.stage1)
    assert out.residuals.shape == (data.n,)
    assert len(out.history) == fast_settings.stage1.epochs
    np.testing.assert_allclose(out.recompute_residuals(data), out.residuals, atol=1e-12)
    assert out.fit_loss == pytest.approx(float(np.mean(out.residuals**2)))


def test_stage1_fits_planted_linear_relation():
    spec = GraphSpec(model=GraphModel.ERDOS_RENYI, n=300, p=0.03)
    ds0 = dataset_from_spec(DatasetSpec(graph=spec, d=1), 0)
    # G·Y = 3·G²X when Y = 3·G·X
    ds = build_dataset(ds0.graph, ds0.X, 3.0 * ds0.X_G[:, 0])
    np.testing.assert_allclose(ds.Y_G, 3.0 * ds.X_G2[:, 0], atol=1e-12)

    cfg = TrainConfig(lr=1e-2, epochs=200, batch_size=64, hidden=(), batchnorm=False, dropout=0.0)
    out = stage1_fit(ds, cfg)
    assert out.r2 > 0.99
    assert np.linalg.norm(out.residuals) < 0.1 * np.linalg.norm(ds.Y_G)


def test_stage1_flags_degenerate_instruments(caplog, fast_cfg):
    G = from_edge_list([], 40)
    X = np.random.default_rng(0).standard_normal((40, 2))
    ds = build_dataset(G, X, X[:, 0])
    with caplog.at_level(logging.WARNING, logger="peerfx_kit"):
        out = stage1_fit(ds, fast_cfg)
    assert out.degenerate_instrument
    assert "all-zero" in caplog.text


def test_zero_epochs_rejected():
    with pytest.raises(ValidationError):
        TrainConfig(epochs=0)


def test_stage2_inputs_layout(small_dataset):
    v = np.arange(small_dataset.n, dtype=float)
    z = stage2_inputs(small_dataset, v)
    assert z.shape == (small_dataset.n, 2 * small_dataset.d + 2)
    np.testing.assert_array_equal(z[:, 0], small_dataset.Y_G)
    np.testing.assert_array_equal(z[:, -1], v)
    assert stage2_inputs(small_dataset, v, include_control=False).shape[1] == 2 * small_dataset.d + 1


def _stage2_setup(ds, cfg, lambda_a=0.05):
    data = preprocess_ig(ds)
    v_hat = np.random.default_rng(0).standard_normal(data.n)
    model = build_stage2_model(data, v_hat, cfg, lambda_a, Stage2Config(lambda_a=lambda_a))
    trainer = Stage2Trainer(model, cfg, cfg)
    z = model.scaled_inputs(data)
    y = model.target_scaler.transform(data.Y)
    v = model.residual_scaler.transform(v_hat)
    return model, trainer, z, y, v


def test_main_step_freezes_discriminator(small_dataset, fast_cfg):
    model, trainer, z, y, v = _stage2_setup(small_dataset, fast_cfg)
    disc_before = [p.copy() for _, p in model.discriminator.parameters()]
    ext_before = [p.copy() for _, p in model.extractor.parameters()]

    l_out, l_disc = trainer.main_step(z[:32], y[:32], v[:32])

    assert np.isfinite(l_out) and l_disc is not None
    for old, (_, new) in zip(disc_before, model.discriminator.parameters()):
        np.testing.assert_array_equal(old, new)
    assert any(
        not np.array_equal(old, new)
        for old, (_, new) in zip(ext_before, model.extractor.parameters())
    )


def test_discriminator_step_freezes_extractor(small_dataset, fast_cfg):
    model, trainer, z, _, v = _stage2_setup(small_dataset, fast_cfg)
    ext_before = [p.copy() for _, p in model.extractor.parameters()]
    head_before = [p.copy() for _, p in model.outcome_head.parameters()]
    trainer.discriminator_step(z[:32], v[:32])
    for old, (_, new) in zip(ext_before, model.extractor.parameters()):
        np.testing.assert_array_equal(old, new)
    for old, (_, new) in zip(head_before, model.outcome_head.parameters()):
        np.testing.assert_array_equal(old, new)


@pytest.mark.parametrize("alternation", ["batch", "epoch"])
def test_history_has_one_entry_per_epoch(small_dataset, fast_cfg, alternation):
    data = preprocess_ig(small_dataset)
    v_hat = stage1_fit(data, fast_cfg).residuals
    options = Stage2Config(lambda_a=0.02, alternation=alternation)
    model = stage2_fit(data, v_hat, fast_cfg, 0.02, options=options)
    assert len(model.history) == fast_cfg.epochs
    assert all(entry.disc is not None for entry in model.history)


def test_history_without_discriminator(small_dataset, fast_cfg):
    data = preprocess_ig(small_dataset)
    v_hat = np.zeros(data.n)
    options = Stage2Config(use_discriminator=False)
    model = stage2_fit(data, v_hat, fast_cfg, 0.01, options=options)
    assert [entry.disc for entry in model.history] == [None] * fast_cfg.epochs


def test_zero_adversarial_weight_matches_disabled_discriminator(small_dataset, fast_cfg):
    data = preprocess_ig(small_dataset)
    v_hat = stage1_fit(data, fast_cfg).residuals

    with_disc = stage2_fit(data, v_hat, fast_cfg, 0.0, options=Stage2Config(lambda_a=0.0))
    without = stage2_fit(
        data, v_hat, fast_cfg, 0.0, options=Stage2Config(lambda_a=0.0, use_discriminator=False)
    )
    assert [h.out for h in with_disc.history] == [h.out for h in without.history]
    assert estimate_pe(with_disc, data).pe_hat == estimate_pe(without, data).pe_hat


def test_stage2_rejects_bad_arguments(small_dataset, fast_cfg):
    with pytest.raises(ValueError, match="non-negative"):
        stage2_fit(small_dataset, np.zeros(small_dataset.n), fast_cfg, -0.1)
    with pytest.raises(ModelError, match="Residual"):
        stage2_fit(small_dataset, np.zeros(3), fast_cfg, 0.1)


def test_run_dig2rsi_is_deterministic(small_dataset, fast_settings):
    kwargs = dict(
        disc_cfg=fast_settings.discriminator, options=fast_settings.stage2_options
    )
    a = run_dig2rsi(small_dataset, fast_settings.stage1, fast_settings.stage2, seed=4, **kwargs)
    b = run_dig2rsi(small_dataset, fast_settings.stage1, fast_settings.stage2, seed=4, **kwargs)
    assert a.model_dump() == b.model_dump()
    np.testing.assert_array_equal(a.per_node_pe, b.per_node_pe)
    assert a.diagnostics.stage1_r2 is not None
    assert a.diagnostics.discriminator_r2 is not None
    assert -1.0 <= a.diagnostics.confounder_corr <= 1.0
    assert a.abs_bias == pytest.approx(abs(a.pe_hat - small_dataset.true_beta))


def test_confounder_correlation(path_graph):
    X = np.array([[0.1], [0.2], [0.4]])
    u = np.array([1.0, -2.0, 0.5])
    with_u = build_dataset(path_graph, X, np.array([1.0, 2.0, 3.0]), U=u)
    assert confounder_correlation(3.0 * u + 1.0, with_u) == pytest.approx(1.0)
    assert confounder_correlation(-u, with_u) == pytest.approx(-1.0)
    assert confounder_correlation(np.full(3, 2.0), with_u) is None

    without_u = build_dataset(path_graph, X, np.array([1.0, 2.0, 3.0]))
    assert confounder_correlation(u, without_u) is None


def test_confounder_correlation_uses_transformed_confounder(small_dataset, fast_settings):
    result = run_dig2rsi(small_dataset, fast_settings.stage1, fast_settings.stage2, seed=2)
    raw = run_dig2rsi(
        small_dataset, fast_settings.stage1, fast_settings.stage2, seed=2, apply_ig=False
    )
    assert result.diagnostics.confounder_corr is not None
    assert raw.diagnostics.confounder_corr is not None
    assert result.diagnostics.confounder_corr != raw.diagnostics.confounder_corr


def test_run_dig2rsi_lambda_override(small_dataset, fast_settings):
    result = run_dig2rsi(
        small_dataset, fast_settings.stage1, fast_settings.stage2, lambda_a=0.07, seed=1
    )
    assert result.diagnostics.lambda_a == 0.07
    assert result.config["stage2_options"]["lambda_a"] == 0.07


def test_run_without_control_function(small_dataset, fast_settings):
    options = Stage2Config(include_control=False)
    result = run_dig2rsi(
        small_dataset, fast_settings.stage1, fast_settings.stage2, seed=0, options=options
    )
    assert all(entry.disc is None for entry in result.diagnostics.history)


def _linear_spec(n, lambda_u, nonlinearity=Nonlinearity.LINEAR):
    return DatasetSpec(
        graph=GraphSpec(model=GraphModel.ERDOS_RENYI, n=n, p=10.0 / n),
        d=3,
        params=SemParams(beta=0.5, lambda_u=lambda_u, nonlinearity=nonlinearity),
    )


def _acceptance_cfgs():
    stage1 = TrainConfig(lr=1e-3, epochs=60, batch_size=128, hidden=(64, 64), batchnorm=True, dropout=0.1)
    stage2 = TrainConfig(lr=1e-3, epochs=60, batch_size=128, hidden=(64, 64), batchnorm=False, dropout=0.0)
    return stage1, stage2


@pytest.mark.slow
def test_unconfounded_recovery():
    stage1, stage2 = _acceptance_cfgs()
    biases = []
    for seed in range(5):
        ds = dataset_from_spec(_linear_spec(3000, 0.0), seed)
        biases.append(run_dig2rsi(ds, stage1, stage2, lambda_a=0.0, seed=seed).abs_bias)
    assert np.mean(biases) < 0.08


@pytest.mark.slow
def test_beats_naive_under_confounding():
    stage1, stage2 = _acceptance_cfgs()
    spec = _linear_spec(3000, 1.0, Nonlinearity.NONLINEAR)
    ours, naive = [], []
    for seed in range(5):
        ds = dataset_from_spec(spec, seed)
        ours.append(run_dig2rsi(ds, stage1, stage2, seed=seed).abs_bias)
        naive.append(naive_ols(ds).abs_bias)
    assert np.mean(ours) < np.mean(naive)


@pytest.mark.slow
def test_residual_tracks_unexplained_exposure():
    stage1, _ = _acceptance_cfgs()
    ds = dataset_from_spec(_linear_spec(5000, 1.0), 0)
    data = preprocess_ig(ds)
    out = stage1_fit(data, stage1)
    target = unexplained_exposure(ds)
    assert np.corrcoef(out.residuals, target)[0, 1] > 0.5


@pytest.mark.slow
def test_residual_confounder_correlation_grows_with_n():
    stage1, _ = _acceptance_cfgs()
    means = []
    for n in (500, 2000, 8000):
        corrs = []
        for seed in range(3):
            data = preprocess_ig(dataset_from_spec(_linear_spec(n, 1.0), seed))
            corrs.append(confounder_correlation(stage1_fit(data, stage1).residuals, data))
        means.append(float(np.mean(corrs)))
    # Sampling noise across three seeds
    assert means[1] >= means[0] - 0.02
    assert means[2] >= means[1] - 0.02
    assert means[2] > means[0]


@pytest.mark.slow
def test_adversary_reduces_probe_r2():
    _, stage2 = _acceptance_cfgs()
    ds = dataset_from_spec(_linear_spec(2000, 1.0), 0)
    data = preprocess_ig(ds)
    v_hat = stage1_fit(data, stage2.model_copy(update={"epochs": 30})).residuals

    def probe(lambda_a):
        model = stage2_fit(data, v_hat, stage2, lambda_a, options=Stage2Config(lambda_a=lambda_a))
        return model.probe_r2(data)

    assert probe(0.05) < probe(0.0)
