import numpy as np
import pytest
import torch

from lesionkit.errors import BoundsError, SchemaError, VersionError
from lesionkit.losses import grouped_softmax
from lesionkit.model import (
    InteractiveLesionNet,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
    tiny_config,
)
from lesionkit.model.encoder import pad_to_multiple
from lesionkit.refine import PointPrompt


def small_config(**overrides):
    base = dict(
        patch_stride=8, embed_dim=24, depth=2, global_layers=(2,), window_size=2,
        num_heads=2, mlp_ratio=2.0, fusion_depth=1, mask_head_depth=1, synergy_dim=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


def fresh_net(seed=0, **overrides) -> InteractiveLesionNet:
    torch.manual_seed(seed)
    return InteractiveLesionNet(small_config(**overrides))


def _click(*coord, label="positive"):
    return PointPrompt(coord=tuple(coord), label=label)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(SchemaError):
        ModelConfig(global_layers=(7,), depth=4)
    with pytest.raises(SchemaError):
        ModelConfig(embed_dim=50, num_heads=4)
    with pytest.raises(SchemaError):
        ModelConfig(attr_group_sizes=(4, 2, 3, 2, 3))
    with pytest.raises(SchemaError):
        ModelConfig.from_dict({"embed_dim": 48, "bogus_key": 1})


def test_config_json_roundtrip(tmp_path):
    cfg = small_config(use_synergy=False)
    path = cfg.to_json(tmp_path / "cfg.json")
    assert ModelConfig.from_json(path) == cfg


# ---------------------------------------------------------------------------
# image encoder
# ---------------------------------------------------------------------------

def test_encoder_grid_shapes():
    net = fresh_net()
    for dim, expected in ((64, 8), (48, 6)):
        vol = torch.rand(dim, dim, dim)
        tokens, grid = net.image_encoder(net._prepare_input(vol, None)[0])
        assert grid == (expected, expected, expected)
        assert tokens.shape == (expected**3, 24)


def test_encoder_pads_non_multiple_dims():
    vol = torch.rand(20, 24, 17)
    padded, shape = pad_to_multiple(torch.stack([vol, torch.zeros_like(vol)]), 8)
    assert shape == (24, 24, 24)
    assert padded.shape == (2, 24, 24, 24)
    net = fresh_net()
    out = net.forward(vol, [_click(3, 3, 3)])
    assert tuple(out.mask_logits.shape) == (20, 24, 17)


def test_encoder_constant_volume_tokens_differ_only_by_position():
    net = fresh_net()
    vol = torch.zeros(32, 32, 32)
    tokens, grid = net.image_encoder(net._prepare_input(vol, None)[0])
    assert torch.isfinite(tokens).all()
    # remove the positional encoding: all patch embeddings must then coincide
    from lesionkit.model.posenc import grid_positional_encoding

    with torch.no_grad():
        x = net.image_encoder.patch_embed(net._prepare_input(vol, None)[0].unsqueeze(0))
        flat = x.permute(0, 2, 3, 4, 1).reshape(-1, 24)
    torch.testing.assert_close(flat, flat[0].expand_as(flat))


def test_encoder_rejects_non_finite():
    from lesionkit.errors import NumericError

    net = fresh_net()
    vol = torch.full((16, 16, 16), float("nan"))
    with pytest.raises(NumericError):
        net.forward(vol, [])


# ---------------------------------------------------------------------------
# prompt encoder
# ---------------------------------------------------------------------------

def test_prompt_tokens_differ_exactly_by_label_embedding():
    net = fresh_net()
    shape = (32, 32, 32)
    pos = net.prompt_encoder([_click(4, 5, 6)], shape)
    neg = net.prompt_encoder([_click(4, 5, 6, label="negative")], shape)
    label = net.prompt_encoder.label_embed.weight
    torch.testing.assert_close(pos - neg, (label[1] - label[0]).unsqueeze(0))


def test_prompt_token_shapes():
    net = fresh_net()
    shape = (32, 32, 32)
    four = net.prompt_encoder([_click(i, i, i) for i in range(4)], shape)
    assert four.shape == (4, 24)
    none = net.prompt_encoder([], shape)
    assert none.shape == (1, 24)
    torch.testing.assert_close(none, net.prompt_encoder.no_prompt)


def test_prompt_out_of_bounds():
    net = fresh_net()
    with pytest.raises(BoundsError):
        net.prompt_encoder([_click(99, 0, 0)], (32, 32, 32))


# ---------------------------------------------------------------------------
# fusion
# ---------------------------------------------------------------------------

def test_fusion_token_count():
    net = fresh_net()
    image = torch.rand(27, 24)
    prompts = torch.rand(4, 24)
    hybrid, image_out = net.fusion(image, prompts)
    assert hybrid.shape == (6, 24)  # iou + mask + 4 prompts
    assert image_out.shape == (27, 24)


def test_fusion_permutation_consistency():
    net = fresh_net()
    image = torch.rand(27, 24)
    prompts = torch.rand(5, 24)
    perm = torch.tensor([3, 0, 4, 1, 2])
    base, img_base = net.fusion(image, prompts)
    permuted, img_perm = net.fusion(image, prompts[perm])
    torch.testing.assert_close(permuted[:2], base[:2], atol=1e-5, rtol=1e-5)
    torch.testing.assert_close(permuted[2:], base[2:][perm], atol=1e-5, rtol=1e-5)
    torch.testing.assert_close(img_perm, img_base, atol=1e-5, rtol=1e-5)


# ---------------------------------------------------------------------------
# heads and synergy
# ---------------------------------------------------------------------------

def test_forward_output_contracts():
    net = fresh_net()
    vol = torch.rand(48, 48, 48)
    out = net.forward(vol, [_click(24, 24, 24)])
    assert tuple(out.mask_logits.shape) == (48, 48, 48)
    assert out.attr_logits.shape == (13,)
    assert 0.0 <= float(out.iou_pred.detach()) <= 1.0
    probs = torch.sigmoid(out.mask_logits)
    assert float(probs.min()) > 0.0 and float(probs.max()) < 1.0
    gs = grouped_softmax(out.attr_logits)
    for sl in ((0, 4), (4, 6), (6, 9), (9, 11), (11, 13)):
        assert float(gs[sl[0] : sl[1]].sum()) == pytest.approx(1.0, abs=1e-6)


def test_synergy_disabled_is_exact_identity():
    net = fresh_net()
    m = torch.rand(1, 24)
    a = torch.rand(7, 24)
    m2, a2 = net.synergy(m, a, enabled=False)
    assert m2 is m and a2 is a
    m3, a3 = net.synergy(m, a, enabled=True)
    assert m3.shape == m.shape and a3.shape == a.shape
    assert not torch.equal(m3, m)


def test_synergy_couples_the_two_branches():
    """With synergy on, attribute-branch parameters influence mask logits and
    mask-branch parameters influence attribute logits; off, they do not."""
    vol = torch.rand(16, 16, 16, dtype=torch.float64)
    clicks = [_click(8, 8, 8)]

    def grads(use_synergy):
        torch.manual_seed(3)
        net = InteractiveLesionNet(small_config(use_synergy=use_synergy)).double()
        out = net.forward(vol, clicks)
        attr_param = net.attr_head.res_mlp.fc1.weight
        mask_param = net.mask_head.refine_blocks[0].attn.q_proj.weight
        g_attr_to_mask = torch.autograd.grad(
            out.mask_logits.sum(), attr_param, retain_graph=True, allow_unused=True
        )[0]
        g_mask_to_attr = torch.autograd.grad(
            out.attr_logits.sum(), mask_param, retain_graph=True, allow_unused=True
        )[0]
        return g_attr_to_mask, g_mask_to_attr

    on_a2m, on_m2a = grads(True)
    assert on_a2m is not None and float(on_a2m.abs().max()) > 0
    assert on_m2a is not None and float(on_m2a.abs().max()) > 0
    off_a2m, off_m2a = grads(False)
    assert off_a2m is None or float(off_a2m.abs().max()) == 0
    assert off_m2a is None or float(off_m2a.abs().max()) == 0


def test_synergy_sensitivity_matches_finite_differences():
    """Perturbing an attribute-branch weight changes mask logits by the amount
    the analytic Jacobian predicts (directional finite difference)."""
    torch.manual_seed(5)
    net = InteractiveLesionNet(small_config(use_synergy=True)).double()
    vol = torch.rand(16, 16, 16, dtype=torch.float64)
    clicks = [_click(8, 8, 8)]
    param = net.attr_head.res_mlp.fc1.weight

    out = net.forward(vol, clicks)
    target = out.mask_logits.sum()
    grad = torch.autograd.grad(target, param)[0]
    direction = torch.randn_like(param)
    analytic = float((grad * direction).sum())

    h = 1e-6
    with torch.no_grad():
        param += h * direction
        up = float(net.forward(vol, clicks).mask_logits.sum())
        param -= 2 * h * direction
        down = float(net.forward(vol, clicks).mask_logits.sum())
        param += h * direction
    fd = (up - down) / (2 * h)
    assert abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-9) < 1e-3


# ---------------------------------------------------------------------------
# forward-level contracts
# ---------------------------------------------------------------------------

def test_eval_determinism_bit_identical():
    net = fresh_net()
    vol = np.random.default_rng(0).random((32, 32, 32), dtype=np.float32)
    clicks = [_click(16, 16, 16), _click(5, 6, 7, label="negative")]
    m1, r1, i1 = net.predict(vol, clicks, seed=4)
    m2, r2, i2 = net.predict(vol, clicks, seed=4)
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_array_equal(r1, r2)
    assert i1 == i2


def test_refinement_toggle_changes_prompts_not_shapes():
    vol = torch.rand(32, 32, 32)
    torch.manual_seed(1)
    with_ref = InteractiveLesionNet(small_config(use_refinement=True))
    torch.manual_seed(1)
    without = InteractiveLesionNet(small_config(use_refinement=False))
    out_ref = with_ref.forward(vol, [_click(16, 16, 16)])
    out_plain = without.forward(vol, [_click(16, 16, 16)])
    assert len(out_ref.prompts_used) == 4  # click + k=3 representatives
    assert len(out_plain.prompts_used) == 1
    assert out_ref.mask_logits.shape == out_plain.mask_logits.shape
    assert out_ref.attr_logits.shape == out_plain.attr_logits.shape


def test_empty_clicks_uses_no_prompt_token():
    net = fresh_net()
    out = net.forward(torch.rand(16, 16, 16), [])
    assert out.prompts_used == []
    assert tuple(out.mask_logits.shape) == (16, 16, 16)


def test_prompt_permutation_invariance_of_outputs():
    net = fresh_net(use_refinement=False)
    vol = torch.rand(32, 32, 32)
    clicks = [_click(4, 4, 4), _click(20, 20, 20, label="negative"), _click(9, 14, 3)]
    out_a = net.forward(vol, clicks)
    out_b = net.forward(vol, [clicks[2], clicks[0], clicks[1]])
    torch.testing.assert_close(out_a.mask_logits, out_b.mask_logits, atol=1e-5, rtol=1e-5)
    torch.testing.assert_close(out_a.attr_logits, out_b.attr_logits, atol=1e-5, rtol=1e-5)


def test_ablation_identities():
    """Synergy/refinement toggles reproduce the reduced variants exactly when
    the weights are identical."""
    vol = np.random.default_rng(3).random((32, 32, 32), dtype=np.float32)
    clicks = [_click(16, 16, 16)]

    torch.manual_seed(7)
    full = InteractiveLesionNet(small_config(use_refinement=True, use_synergy=True))

    # same weights, synergy off == point_refinement variant
    pr = InteractiveLesionNet(small_config(use_refinement=True, use_synergy=False))
    pr.load_state_dict(full.state_dict())
    full.config.use_synergy = False
    m_full, r_full, i_full = full.predict(vol, clicks, seed=0)
    m_pr, r_pr, i_pr = pr.predict(vol, clicks, seed=0)
    np.testing.assert_array_equal(m_full, m_pr)
    np.testing.assert_array_equal(r_full, r_pr)
    assert i_full == i_pr
    full.config.use_synergy = True

    # refinement off too == vanilla
    vanilla = InteractiveLesionNet(small_config(use_refinement=False, use_synergy=False))
    vanilla.load_state_dict(full.state_dict())
    pr.config.use_refinement = False
    m_v, r_v, _ = vanilla.predict(vol, clicks, seed=0)
    m_pr2, r_pr2, _ = pr.predict(vol, clicks, seed=0)
    np.testing.assert_array_equal(m_v, m_pr2)
    np.testing.assert_array_equal(r_v, r_pr2)


def test_mask_feedback_channel_changes_output():
    net = fresh_net()
    vol = np.random.default_rng(1).random((16, 16, 16), dtype=np.float32)
    prev = np.zeros_like(vol)
    prev[6:10, 6:10, 6:10] = 0.9
    m_without, _, _ = net.predict(vol, [_click(8, 8, 8)], seed=0)
    m_with, _, _ = net.predict(vol, [_click(8, 8, 8)], prev_mask=prev, seed=0)
    assert not np.array_equal(m_without, m_with)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def test_checkpoint_roundtrip_bit_identical(tmp_path):
    net = fresh_net(seed=11)
    vol = np.random.default_rng(2).random((16, 16, 16), dtype=np.float32)
    clicks = [_click(8, 8, 8)]
    before = net.predict(vol, clicks, seed=1)
    path = save_checkpoint(tmp_path / "model.ckpt", net)
    loaded = load_checkpoint(path)
    assert loaded.config == net.config
    after = loaded.predict(vol, clicks, seed=1)
    np.testing.assert_array_equal(before[0], after[0])
    np.testing.assert_array_equal(before[1], after[1])
    assert before[2] == after[2]


def test_checkpoint_schema_version_enforced(tmp_path):
    net = fresh_net()
    path = save_checkpoint(tmp_path / "model.ckpt", net)
    payload = torch.load(path, weights_only=True)
    payload["schema_version"] = 999
    torch.save(payload, path)
    with pytest.raises(VersionError):
        load_checkpoint(path)


def test_tiny_config_forward_runs_in_float64():
    torch.manual_seed(0)
    net = InteractiveLesionNet(tiny_config()).double()
    vol = torch.rand(8, 8, 8, dtype=torch.float64)
    out = net.forward(vol, [_click(4, 4, 4)])
    assert out.mask_logits.dtype == torch.float64
    assert tuple(out.mask_logits.shape) == (8, 8, 8)
