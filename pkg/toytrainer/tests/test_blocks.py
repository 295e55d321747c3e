"""Searchable block construction, wiring, and trainability."""
from __future__ import annotations

import pytest
import torch

from toytrainer.blocks import (
    EMBED_DIM,
    GROWTH,
    N_BLOCKS,
    OP_NAMES,
    RES_CHANNELS,
    STEM_CHANNELS,
    EmbeddingNet,
    SearchableBlock,
    make_op,
    parameter_count,
    signature,
)
from toytrainer.heads import HeadSpec, margin_loss


class TestMakeOp:
    @pytest.mark.parametrize("name", OP_NAMES)
    def test_constructible_and_shape_preserving(self, name):
        op = make_op(name, 8, 12)
        out = op(torch.randn(2, 8, 16, 16))
        assert out.shape == (2, 12, 16, 16)

    def test_unknown_op_rejected(self):
        with pytest.raises(ValueError, match="unknown op"):
            make_op("Conv9x9", 8, 8)

    def test_bn_prefix_normalizes_before_conv(self):
        op = make_op("BnConv3x3", 8, 12)
        assert isinstance(op[0], torch.nn.BatchNorm2d)
        assert isinstance(op[1], torch.nn.Conv2d)
        assert op[0].num_features == 8

    def test_bn_suffix_normalizes_after_conv(self):
        op = make_op("Conv3x3Bn", 8, 12)
        assert isinstance(op[0], torch.nn.Conv2d)
        assert isinstance(op[1], torch.nn.BatchNorm2d)
        assert op[1].num_features == 12
        assert op[0].bias is None  # the following norm owns the shift

    def test_plain_conv_has_no_norm(self):
        op = make_op("Conv5x5", 8, 12)
        assert len(op) == 1
        assert isinstance(op[0], torch.nn.Conv2d)

    @pytest.mark.parametrize("name,kernel", [
        ("Conv1x1", 1), ("BnConv3x3", 3), ("Conv5x5Bn", 5),
    ])
    def test_kernel_size_and_padding(self, name, kernel):
        conv = [m for m in make_op(name, 4, 4) if isinstance(m, torch.nn.Conv2d)][0]
        assert conv.kernel_size == (kernel, kernel)
        assert conv.padding == (kernel // 2, kernel // 2)


class TestSearchableBlock:
    def test_grows_channels_by_fixed_amount(self):
        block = SearchableBlock(STEM_CHANNELS, "Conv3x3", "Conv1x1", "Conv3x3")
        out = block(torch.randn(2, STEM_CHANNELS, 16, 16))
        assert out.shape == (2, STEM_CHANNELS + GROWTH, 16, 16)

    def test_residual_path_adds_input(self):
        block = SearchableBlock(STEM_CHANNELS, "Conv1x1", "Conv1x1", "Conv1x1")
        # zero every parameter so the ops contribute nothing
        with torch.no_grad():
            for p in block.parameters():
                p.zero_()
        x = torch.randn(2, STEM_CHANNELS, 8, 8)
        out = block(x)
        assert torch.equal(out[:, :RES_CHANNELS], x[:, :RES_CHANNELS])
        assert torch.equal(out[:, RES_CHANNELS:STEM_CHANNELS], x[:, RES_CHANNELS:])
        assert torch.all(out[:, STEM_CHANNELS:] == 0)

    def test_rejects_too_narrow_input(self):
        with pytest.raises(ValueError, match="at least"):
            SearchableBlock(RES_CHANNELS - 1, "Conv1x1", "Conv1x1", "Conv1x1")


class TestEmbeddingNet:
    def test_all_conv1x1_forward_shape(self):
        net = EmbeddingNet(("Conv1x1", "Conv1x1", "Conv1x1"))
        out = net(torch.randn(4, 3, 32, 32))
        assert out.shape == (4, EMBED_DIM)

    def test_embed_dim_override(self):
        net = EmbeddingNet(("Conv1x1", "Conv1x1", "Conv1x1"), embed_dim=16)
        assert net(torch.randn(4, 3, 32, 32)).shape == (4, 16)

    def test_channel_schedule(self):
        net = EmbeddingNet(("Conv3x3", "Conv3x3", "Conv3x3"))
        widths = [b.out_channels for b in net.blocks]
        assert widths == [STEM_CHANNELS + GROWTH * (i + 1) for i in range(N_BLOCKS)]

    def test_needs_exactly_three_ops(self):
        with pytest.raises(ValueError, match="three"):
            EmbeddingNet(("Conv1x1", "Conv1x1"))

    def test_structural_diff_across_slot_one(self):
        signatures = {
            signature(EmbeddingNet((op, "Conv1x1", "Conv1x1")))
            for op in OP_NAMES
        }
        assert len(signatures) == len(OP_NAMES)

    def test_parameter_count_positive_and_op_dependent(self):
        small = parameter_count(EmbeddingNet(("Conv1x1", "Conv1x1", "Conv1x1")))
        large = parameter_count(EmbeddingNet(("Conv5x5", "Conv5x5", "Conv5x5")))
        assert 0 < small < large


def _five_epoch_losses(op: str, faces) -> list[float]:
    torch.manual_seed(0)
    net = EmbeddingNet((op, op, op))
    prototypes = torch.nn.Parameter(torch.randn(16, EMBED_DIM) * 0.05)
    spec = HeadSpec("CosFace")
    optimizer = torch.optim.SGD(list(net.parameters()) + [prototypes],
                                lr=0.1, momentum=0.9)
    epoch_means = []
    for _ in range(5):
        order = torch.randperm(len(faces))
        total = 0.0
        for lo in range(0, len(faces), 16):
            batch = order[lo:lo + 16]
            optimizer.zero_grad()
            loss = margin_loss(spec, net(faces.images[batch]), prototypes,
                               faces.labels[batch])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(batch)
        epoch_means.append(total / len(faces))
    return epoch_means


def test_every_op_is_trainable(faces):
    """Five epochs of SGD should reduce the loss for nearly every op choice."""
    torch.set_num_threads(1)
    improved = 0
    for op in OP_NAMES:
        losses = _five_epoch_losses(op, faces)
        if losses[-1] < losses[0]:
            improved += 1
    assert improved >= len(OP_NAMES) - 1, improved
