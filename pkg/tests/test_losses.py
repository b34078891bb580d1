import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionkit.errors import AlignmentError, SchemaError
from lesionkit.losses import (
    attr_loss,
    dice_loss,
    grouped_softmax,
    hard_iou,
    lambda_schedule,
    soft_iou,
    total_loss,
)


def test_dice_perfect_overlap_is_zero():
    mask = torch.zeros(1000)
    mask[:100] = 1.0
    assert float(dice_loss(mask, mask)) == pytest.approx(0.0, abs=1e-8)


def test_dice_disjoint_is_one():
    pred = torch.zeros(200)
    gt = torch.zeros(200)
    pred[:50] = 1.0
    gt[50:100] = 1.0
    assert float(dice_loss(pred, gt)) == pytest.approx(1.0, abs=1e-9)


def test_dice_two_voxel_toy():
    # direct hand evaluation: 1 - (2*0.5) / (1.0 + 1.0 + eps) ~= 0.5
    pred = torch.tensor([0.5, 0.5])
    gt = torch.tensor([1.0, 0.0])
    assert float(dice_loss(pred, gt)) == pytest.approx(0.5, abs=1e-6)


def test_dice_shape_mismatch():
    with pytest.raises(AlignmentError):
        dice_loss(torch.zeros(3), torch.zeros(4))


def test_dice_differentiable_in_pred():
    pred = torch.rand(64, dtype=torch.float64, requires_grad=True)
    gt = (torch.rand(64) > 0.5).double()
    loss = dice_loss(pred, gt)
    loss.backward()
    assert pred.grad is not None and torch.isfinite(pred.grad).all()


def test_attr_loss_near_perfect_prediction():
    # huge logit on every true class -> probability ~1 -> loss ~0
    logits = torch.full((13,), -30.0)
    target = torch.zeros(13)
    for idx in (0, 4, 6, 9, 11):  # first category of each group
        logits[idx] = 30.0
        target[idx] = 1.0
    assert float(attr_loss(logits, target)) < 1e-6


def test_attr_loss_uniform_logits_closed_form():
    # closed form: mean of -log(1/K) per group = (ln4 + ln2 + ln3 + ln2 + ln2)/5
    expected = (math.log(4) + math.log(2) + math.log(3) + math.log(2) + math.log(2)) / 5
    assert expected == pytest.approx(0.9129, abs=5e-5)
    logits = torch.zeros(13)
    target = torch.zeros(13)
    for idx in (1, 5, 8, 10, 12):
        target[idx] = 1.0
    assert float(attr_loss(logits, target)) == pytest.approx(expected, abs=1e-7)


def test_attr_loss_one_uniform_group_contributes_ln4_over_5():
    logits = torch.full((13,), -30.0)
    target = torch.zeros(13)
    for idx in (0, 4, 6, 9, 11):
        target[idx] = 1.0
        if idx != 0:
            logits[idx] = 30.0
    logits[:4] = 0.0  # shape group uniform; true class is index 0
    expected = math.log(4) / 5
    assert float(attr_loss(logits, target)) == pytest.approx(expected, abs=1e-6)


def test_attr_loss_rejects_non_onehot_target():
    logits = torch.zeros(13)
    target = torch.zeros(13)
    with pytest.raises(SchemaError):
        attr_loss(logits, target)
    target[0] = target[1] = 1.0  # two hots in the shape group
    for idx in (4, 6, 9, 11):
        target[idx] = 1.0
    with pytest.raises(SchemaError):
        attr_loss(logits, target)


def test_attr_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    logits = torch.tensor(rng.normal(size=13), dtype=torch.float64, requires_grad=True)
    target = torch.zeros(13, dtype=torch.float64)
    for idx in (2, 5, 7, 10, 12):
        target[idx] = 1.0
    loss = attr_loss(logits, target)
    loss.backward()
    h = 1e-6
    for i in range(13):
        probe = logits.detach().clone()
        probe[i] += h
        up = float(attr_loss(probe, target))
        probe[i] -= 2 * h
        down = float(attr_loss(probe, target))
        fd = (up - down) / (2 * h)
        ana = float(logits.grad[i])
        assert abs(fd - ana) / max(abs(fd), abs(ana), 1e-8) < 1e-3


def test_grouped_softmax_rows_sum_to_one_and_shift_invariance():
    logits = torch.tensor(np.random.default_rng(1).normal(size=13))
    probs = grouped_softmax(logits)
    sums = [float(probs[0:4].sum()), float(probs[4:6].sum()), float(probs[6:9].sum()),
            float(probs[9:11].sum()), float(probs[11:13].sum())]
    for s in sums:
        assert s == pytest.approx(1.0, abs=1e-6)
    shifted = logits.clone()
    shifted[0:4] += 7.5  # constant shift inside one group
    torch.testing.assert_close(grouped_softmax(shifted), probs, atol=1e-9, rtol=0)


def test_total_loss_arithmetic():
    b = total_loss(0.5, 0.9, 0.0, lambda_attr=1.0, iou_weight=0.0)
    assert float(b.total) == pytest.approx(1.4)
    b = total_loss(0.7, 123.0, 0.0, lambda_attr=0.0, iou_weight=0.0)
    assert float(b.total) == pytest.approx(0.7)
    b = total_loss(0.3, 0.2, 0.0, lambda_attr=2.0, iou_weight=0.0)
    assert float(b.total) == pytest.approx(0.7)
    b = total_loss(0.3, 0.2, 0.1, lambda_attr=1.0, iou_weight=1.0)
    assert float(b.total) == pytest.approx(float(b.seg) + b.lambda_attr * float(b.attr)
                                           + b.iou_weight * float(b.iou), abs=1e-9)


def test_lambda_schedule():
    assert lambda_schedule(0) == 1.0
    assert lambda_schedule(0, warmup_epochs=4) == pytest.approx(0.25)
    assert lambda_schedule(3, warmup_epochs=4) == pytest.approx(1.0)
    assert lambda_schedule(99, warmup_epochs=4) == 1.0


@given(st.integers(0, 2**20 - 1))
@settings(max_examples=30, deadline=None)
def test_binary_dice_loss_plus_dsc_is_one(bits):
    from lesionkit.metrics import dsc

    pattern = np.array([(bits >> i) & 1 for i in range(20)], dtype=np.float64)
    gt = np.ones(20)
    if pattern.sum() + gt.sum() == 0:
        return
    loss = float(dice_loss(torch.tensor(pattern), torch.tensor(gt)))
    score = dsc(pattern.reshape(4, 5, 1), gt.reshape(4, 5, 1))
    assert loss + score == pytest.approx(1.0, abs=1e-6)


def test_soft_and_hard_iou():
    pred = torch.tensor([1.0, 1.0, 0.0, 0.0])
    gt = torch.tensor([1.0, 0.0, 1.0, 0.0])
    assert float(soft_iou(pred, gt)) == pytest.approx(1 / 3, abs=1e-6)
    assert float(hard_iou(pred, gt)) == pytest.approx(1 / 3, abs=1e-9)
    assert float(hard_iou(torch.zeros(4), torch.zeros(4))) == 1.0
