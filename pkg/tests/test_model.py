import math

import numpy as np
import pytest

import latticepath.autodiff as ad
from latticepath.autodiff import Tensor
from latticepath.corpus import Trajectory
from latticepath.lattice import LatticeCoord, default_workspace, desk_workspace
from latticepath.model import (
    MOVE_VOCAB,
    LossConfig,
    ModelConfig,
    Optimizer,
    OptimizerConfig,
    PathModel,
    StepLogits,
    composite_loss,
    context_features,
    fit,
    make_loss_batch,
    masked_softmax,
    train_step,
)
from latticepath.taskgrid import build_context, reach_only_graph

C = LatticeCoord


def tiny_cfg(**overrides):
    base = dict(embed_dim=8, num_layers=1, num_heads=2, max_seq_len=8)
    base.update(overrides)
    return ModelConfig(**base)


def ctx_for(goal, hint=4):
    return build_context(reach_only_graph(), 0, sequence_length_hint=hint, target=goal)


# config and logits ------------------------------------------------------------


def test_model_config_validation():
    with pytest.raises(ValueError):
        tiny_cfg(embed_dim=10, num_heads=4)  # not divisible
    with pytest.raises(ValueError):
        tiny_cfg(max_seq_len=1)
    with pytest.raises(ValueError):
        ModelConfig(move_vocab=6)


def test_model_config_round_trip():
    cfg = tiny_cfg(bounds=(-2, 2, -2, 2, 0, 2))
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_step_logits_masks_illegal_entries():
    raw = np.arange(7.0)
    legal = np.array([True, False, True, True, True, True, True])
    s = StepLogits(raw=raw, legal_mask=legal)
    assert s.masked[1] == -np.inf
    assert s.masked[0] == 0.0


def test_step_logits_shape_checked():
    with pytest.raises(ValueError):
        StepLogits(raw=np.zeros(6), legal_mask=np.ones(6, dtype=bool))


def test_masked_softmax_uniform_over_legal():
    legal = np.array([True, True, False, False, True, False, True])
    p = masked_softmax(StepLogits(raw=np.zeros(7), legal_mask=legal))
    np.testing.assert_allclose(p[legal], 0.25)
    assert np.all(p[~legal] == 0.0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_masked_softmax_single_legal_entry():
    legal = np.zeros(7, dtype=bool)
    legal[6] = True
    p = masked_softmax(StepLogits(raw=np.random.default_rng(0).normal(size=7), legal_mask=legal))
    assert p[6] == 1.0
    assert np.all(p[:6] == 0.0)


def test_masked_softmax_matches_plain_softmax_when_all_legal():
    raw = np.random.default_rng(1).normal(size=7)
    p = masked_softmax(StepLogits(raw=raw, legal_mask=np.ones(7, dtype=bool)))
    e = np.exp(raw - raw.max())
    np.testing.assert_allclose(p, e / e.sum(), atol=1e-12)


def test_masked_softmax_requires_a_legal_entry():
    with pytest.raises(ValueError):
        masked_softmax(StepLogits(raw=np.zeros(7), legal_mask=np.zeros(7, dtype=bool)))


def test_context_features_goal_block():
    cfg = tiny_cfg()  # desk bounds
    hi = context_features(ctx_for(C(3, 3, 4)), cfg)
    np.testing.assert_allclose(hi[-4:], [1.0, 1.0, 1.0, 1.0])
    lo = context_features(ctx_for(C(-3, -3, 0)), cfg)
    np.testing.assert_allclose(lo[-4:], [0.0, 0.0, 0.0, 1.0])
    none = context_features(ctx_for(None), cfg)
    np.testing.assert_allclose(none[-4:], [0.0, 0.0, 0.0, 0.0])


def test_context_features_rejects_wrong_width():
    cfg = tiny_cfg(task_feature_width=3)
    with pytest.raises(ValueError):
        context_features(ctx_for(C(0, 0, 0)), cfg)


# embeddings and forward -------------------------------------------------------


def test_embed_step_position_contribution():
    m = PathModel(tiny_cfg(), seed=0)
    ctx = ctx_for(C(1, 0, 0))
    e0 = m.embed_step(C(0, 0, 0), ctx, 0)
    e1 = m.embed_step(C(0, 0, 0), ctx, 1)
    np.testing.assert_allclose(e1 - e0, m.params["seq"].data[1] - m.params["seq"].data[0])


def test_embed_step_is_deterministic_per_seed():
    a = PathModel(tiny_cfg(), seed=3)
    b = PathModel(tiny_cfg(), seed=3)
    c = PathModel(tiny_cfg(), seed=4)
    ctx = ctx_for(C(1, 1, 0))
    np.testing.assert_array_equal(a.embed_step(C(0, 0, 0), ctx, 2), b.embed_step(C(0, 0, 0), ctx, 2))
    assert not np.array_equal(a.embed_step(C(0, 0, 0), ctx, 2), c.embed_step(C(0, 0, 0), ctx, 2))


def test_embed_step_rejects_bad_inputs():
    m = PathModel(tiny_cfg(), seed=0)
    ctx = ctx_for(C(0, 0, 0))
    with pytest.raises(ValueError):
        m.embed_step(C(0, 0, 0), ctx, 8)  # position out of range
    with pytest.raises(ValueError) as err:
        m.embed_step(C(9, 0, 0), ctx, 0)  # outside the model box
    assert "axis x" in str(err.value)


def test_forward_interior_cell_all_legal():
    m = PathModel(tiny_cfg(), seed=0)
    s = m.forward([C(0, 0, 2)], ctx_for(C(1, 0, 2)), desk_workspace())
    assert s.legal_mask.tolist() == [True] * 7


def test_forward_corner_cell_three_moves_plus_stop():
    cfg = tiny_cfg(bounds=(-22, 22, -22, 22, 0, 34))
    m = PathModel(cfg, seed=0)
    s = m.forward([C(-22, -22, 0)], ctx_for(C(0, 0, 0)), default_workspace())
    assert s.legal_mask.tolist() == [True, False, True, False, True, False, True]
    p = masked_softmax(s)
    assert np.all(p[[1, 3, 5]] == 0.0)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_forward_validates_prefix():
    m = PathModel(tiny_cfg(), seed=0)
    w = desk_workspace()
    ctx = ctx_for(C(0, 0, 0))
    with pytest.raises(ValueError):
        m.forward([], ctx, w)
    with pytest.raises(ValueError):
        m.forward([C(0, 0, 0)] * 9, ctx, w)
    with pytest.raises(ValueError):
        m.forward([C(0, 0, -1)], ctx, w)


def test_forward_batch_is_causal():
    """Changing a later point must not perturb earlier logits at all."""
    m = PathModel(tiny_cfg(), seed=1)
    ctx = context_features(ctx_for(C(2, 0, 0)), m.cfg)[None, :]
    pts_a = np.array([[(0, 0, 0), (1, 0, 0), (2, 0, 0), (2, 1, 0)]], dtype=np.int64)
    pts_b = np.array([[(0, 0, 0), (1, 0, 0), (2, 0, 0), (2, 0, 1)]], dtype=np.int64)
    la = m.forward_batch(pts_a, ctx).data
    lb = m.forward_batch(pts_b, ctx).data
    np.testing.assert_array_equal(la[0, :3], lb[0, :3])
    assert not np.array_equal(la[0, 3], lb[0, 3])


def test_forward_batch_rejects_overlong_sequences():
    m = PathModel(tiny_cfg(), seed=0)
    pts = np.zeros((1, 9, 3), dtype=np.int64)
    ctx = context_features(ctx_for(C(0, 0, 0)), m.cfg)[None, :]
    with pytest.raises(ValueError):
        m.forward_batch(pts, ctx)


# loss ---------------------------------------------------------------------------


def one_move_batch(cfg):
    # interior cells (z=2): all six moves plus STOP are legal at both points
    traj = Trajectory(points=(C(0, 0, 2), C(1, 0, 2)))
    return make_loss_batch([(traj, ctx_for(C(1, 0, 2), hint=2), desk_workspace())], cfg)


def test_make_loss_batch_layout():
    cfg = tiny_cfg()
    t1 = Trajectory(points=(C(0, 0, 0), C(1, 0, 0)))
    t2 = Trajectory(points=(C(0, 0, 0), C(0, 1, 0), C(0, 2, 0), C(1, 2, 0)))
    w = desk_workspace()
    batch = make_loss_batch([(t1, ctx_for(t1.end), w), (t2, ctx_for(t2.end), w)], cfg)
    assert batch.points.shape == (2, 4, 3)
    np.testing.assert_array_equal(batch.points[0, 1:], np.array([[1, 0, 0]] * 3))  # padding repeats
    assert batch.gold_moves[0].tolist() == [0, 6, 6, 6]  # +x, then STOP padding
    assert batch.gold_moves[1].tolist() == [2, 2, 0, 6]
    np.testing.assert_array_equal(batch.legal[0, 2], batch.legal[0, 1])
    assert batch.move_pos[0].tolist() == [1.0, 0.0, 0.0, 0.0]
    assert batch.all_pos[1].tolist() == [1.0, 1.0, 1.0, 1.0]
    assert batch.term_index.tolist() == [1, 3]


def test_make_loss_batch_rejects_empty_and_overlong():
    cfg = tiny_cfg(max_seq_len=3)
    with pytest.raises(ValueError):
        make_loss_batch([], cfg)
    t = Trajectory(points=(C(0, 0, 0), C(1, 0, 0), C(2, 0, 0), C(3, 0, 0)))
    with pytest.raises(ValueError):
        make_loss_batch([(t, ctx_for(t.end), desk_workspace())], cfg)


def test_composite_loss_uniform_logits_hand_values():
    """Zero logits mean uniform p=1/7 over the 7 legal entries at interior cells."""
    cfg = tiny_cfg()
    batch = one_move_batch(cfg)
    logits = Tensor(np.zeros((1, 2, MOVE_VOCAB)))
    _, bd = composite_loss(logits, batch, LossConfig())
    assert bd.seq == pytest.approx(math.log(7.0), abs=1e-12)
    assert bd.valid == pytest.approx(0.0, abs=1e-15)
    assert bd.cov == pytest.approx(math.log(7.0) + 1.0 / 7.0, abs=1e-12)
    assert bd.len == pytest.approx(1.0 / 14.0, abs=1e-12)
    assert 0.0 <= bd.coord <= 1.0


def test_composite_loss_zero_lambdas_reduce_to_seq():
    cfg = tiny_cfg()
    batch = one_move_batch(cfg)
    logits = Tensor(np.random.default_rng(2).normal(size=(1, 2, MOVE_VOCAB)))
    _, bd = composite_loss(
        logits, batch, LossConfig(lambda_coord=0.0, lambda_valid=0.0, lambda_cov=0.0, lambda_len=0.0)
    )
    assert bd.total == pytest.approx(bd.seq, abs=1e-15)


def test_composite_loss_names_non_finite_terms():
    cfg = tiny_cfg()
    batch = one_move_batch(cfg)
    logits = Tensor(np.full((1, 2, MOVE_VOCAB), np.inf))
    with np.errstate(invalid="ignore"):
        with pytest.raises(FloatingPointError):
            composite_loss(logits, batch, LossConfig())


def test_composite_loss_gradcheck_through_model():
    """End-to-end analytic gradients of the total loss for a few parameters."""
    cfg = tiny_cfg()
    m = PathModel(cfg, seed=5)
    t1 = Trajectory(points=(C(0, 0, 0), C(1, 0, 0), C(1, 1, 0)))
    t2 = Trajectory(points=(C(-1, 0, 1), C(-1, 1, 1)))
    w = desk_workspace()
    batch = make_loss_batch([(t1, ctx_for(t1.end, 3), w), (t2, ctx_for(t2.end, 2), w)], cfg)
    lcfg = LossConfig()

    def loss_value():
        total, _ = composite_loss(m.forward_batch(batch.points, batch.ctx_mat), batch, lcfg)
        return total

    m.zero_grad()
    loss_value().backward()
    for name in ("coord_x", "l0.wq", "l0.w1", "lnf_g", "head_w"):
        p = m.params[name]
        analytic = p.grad.copy()
        original = p.data.copy()

        def f(candidate):
            p.data[...] = candidate
            with ad.no_grad():
                v = loss_value().item()
            p.data[...] = original
            return v

        numeric = ad.numeric_gradient(f, original, h=1e-4)
        denom = max(np.abs(numeric).max(), 1e-8)
        assert np.abs(analytic - numeric).max() / denom < 1e-4, name


# optimizers ---------------------------------------------------------------------


def test_optimizer_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        OptimizerConfig(kind="rmsprop")
    cfg = OptimizerConfig(kind="adam", lr=0.01, weight_decay=0.1)
    assert OptimizerConfig.from_dict(cfg.to_dict()) == cfg


def test_sgd_step():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.array([0.5, 0.5])
    Optimizer(OptimizerConfig(kind="sgd", lr=0.1)).step([("p", p)])
    np.testing.assert_allclose(p.data, [0.95, -2.05])


def test_momentum_accumulates_velocity():
    p = Tensor(np.array([0.0]), requires_grad=True)
    opt = Optimizer(OptimizerConfig(kind="momentum", lr=1.0, momentum=0.9))
    for _ in range(2):
        p.grad = np.array([1.0])
        opt.step([("p", p)])
    # steps: -1.0, then -(0.9 + 1.0)
    np.testing.assert_allclose(p.data, [-2.9])


def test_adam_first_step_is_lr_sized():
    p = Tensor(np.array([0.0]), requires_grad=True)
    p.grad = np.array([123.0])
    Optimizer(OptimizerConfig(kind="adam", lr=0.01)).step([("p", p)])
    np.testing.assert_allclose(p.data, [-0.01], rtol=1e-6)


def test_decoupled_weight_decay_applies_after_update():
    p = Tensor(np.array([2.0]), requires_grad=True)
    p.grad = np.array([0.0])
    Optimizer(OptimizerConfig(kind="sgd", lr=0.1, weight_decay=0.5)).step([("p", p)])
    np.testing.assert_allclose(p.data, [2.0 * (1.0 - 0.05)])


def test_train_step_zero_lr_keeps_parameters():
    cfg = tiny_cfg()
    m = PathModel(cfg, seed=6)
    before = {k: v.data.copy() for k, v in m.params.items()}
    batch = one_move_batch(cfg)
    train_step(m, batch, LossConfig(), Optimizer(OptimizerConfig(kind="sgd", lr=0.0)))
    for k, v in m.params.items():
        np.testing.assert_array_equal(v.data, before[k])


def test_fit_returns_per_epoch_history():
    cfg = tiny_cfg()
    m = PathModel(cfg, seed=7)
    w = desk_workspace()
    items = [
        (Trajectory(points=(C(0, 0, 0), C(1, 0, 0))), ctx_for(C(1, 0, 0), 2), w),
        (Trajectory(points=(C(0, 0, 0), C(0, 1, 0))), ctx_for(C(0, 1, 0), 2), w),
    ]
    seen = []
    history = fit(m, items, LossConfig(), Optimizer(OptimizerConfig(kind="sgd", lr=0.1)),
                  epochs=3, batch_size=2, seed=0, log=lambda e, bd: seen.append(e))
    assert len(history) == 3
    assert seen == [0, 1, 2]
    assert history[2].total < history[0].total  # it should be learning this


def test_fit_is_deterministic():
    cfg = tiny_cfg()
    w = desk_workspace()
    items = [
        (Trajectory(points=(C(0, 0, 0), C(1, 0, 0))), ctx_for(C(1, 0, 0), 2), w),
        (Trajectory(points=(C(1, 1, 0), C(1, 2, 0))), ctx_for(C(1, 2, 0), 2), w),
        (Trajectory(points=(C(0, 0, 1), C(0, 0, 2))), ctx_for(C(0, 0, 2), 2), w),
    ]

    def run():
        m = PathModel(cfg, seed=8)
        fit(m, items, LossConfig(), Optimizer(OptimizerConfig(kind="adam", lr=0.01)),
            epochs=2, batch_size=2, seed=3)
        return {k: v.data.copy() for k, v in m.params.items()}

    a, b = run(), run()
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])
