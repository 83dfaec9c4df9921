import math

import numpy as np
import pytest
import torch

from sketchvision import inverse_drawings as idw


def test_adversarial_loss_zero_logits():
    scores = torch.zeros(1, 1, 5, 5)
    assert float(idw.adversarial_loss(scores, True)) == pytest.approx(math.log(2), abs=1e-6)
    assert float(idw.adversarial_loss(scores, False)) == pytest.approx(math.log(2), abs=1e-6)


def test_adversarial_loss_saturating_logit():
    scores = torch.full((1, 1, 4, 4), 20.0)
    assert float(idw.adversarial_loss(scores, True)) < 1e-3


def test_adversarial_loss_mixed_map():
    # scalar oracle: mean of ln 2 and softplus(-20)
    scores = torch.zeros(1, 1, 2, 2)
    scores[0, 0, 0, :] = 20.0
    expected = 0.5 * (math.log(2) + math.log1p(math.exp(-20.0)))
    assert float(idw.adversarial_loss(scores, True)) == pytest.approx(expected, abs=1e-6)


def test_toy_embedder_unit_norm():
    rng = np.random.default_rng(0)
    imgs = torch.rand(4, 3, 16, 16)
    emb = idw.ToyEmbedder().embed(imgs)
    assert emb.shape == (4, 192)
    assert emb.norm(dim=1) == pytest.approx(np.ones(4), abs=1e-6)
    const = torch.full((2, 3, 16, 16), 0.5)
    assert idw.ToyEmbedder().embed(const).norm(dim=1) == pytest.approx(np.ones(2), abs=1e-6)


def test_semantic_loss_identical_is_zero():
    img = torch.rand(1, 3, 16, 16)
    assert float(idw.semantic_loss(idw.ToyEmbedder(), img, img)) == pytest.approx(0.0, abs=1e-6)


def test_semantic_loss_orthogonal_fixtures():
    # left/right split vs top/bottom split: zero-mean patterns whose
    # pooled embeddings are exactly orthogonal
    a = torch.full((1, 3, 16, 16), 0.25)
    a[:, :, :, 8:] = 0.75
    b = torch.full((1, 3, 16, 16), 0.25)
    b[:, :, 8:, :] = 0.75
    assert float(idw.semantic_loss(idw.ToyEmbedder(), a, b)) == pytest.approx(1.0, abs=1e-6)


def test_semantic_loss_matches_brute_force_cosine():
    rng = np.random.default_rng(1)
    a = torch.tensor(rng.random((1, 3, 16, 16)), dtype=torch.float32)
    b = torch.tensor(rng.random((1, 3, 16, 16)), dtype=torch.float32)

    def embed_np(x):
        x = x.numpy()[0]
        pooled = x.reshape(3, 8, 2, 8, 2).mean(axis=(2, 4)).reshape(-1)
        centered = pooled - pooled.mean()
        return centered / np.linalg.norm(centered)

    expected = 1.0 - float(embed_np(a) @ embed_np(b))
    got = float(idw.semantic_loss(idw.ToyEmbedder(), a, b))
    assert got == pytest.approx(expected, abs=1e-6)


def test_semantic_loss_range():
    rng = np.random.default_rng(2)
    for _ in range(5):
        a = torch.rand(1, 3, 16, 16)
        b = torch.rand(1, 3, 16, 16)
        v = float(idw.semantic_loss(idw.ToyEmbedder(), a, b))
        assert 0.0 <= v <= 2.0


def test_geometry_loss_trivials():
    gen = torch.rand(1, 3, 16, 16)
    label = idw.pseudo_depth_torch(gen)
    assert float(idw.geometry_loss(idw.pseudo_depth_torch, gen, label)) == pytest.approx(0.0, abs=1e-7)
    ones = torch.ones(1, 1, 16, 16)
    zeros = torch.zeros(1, 1, 16, 16)
    ident = lambda x: zeros
    assert float(idw.geometry_loss(ident, gen, ones)) == pytest.approx(1.0)


def test_geometry_loss_matches_elementwise_oracle():
    rng = np.random.default_rng(3)
    gen = torch.tensor(rng.random((1, 3, 16, 16)), dtype=torch.float64)
    label = torch.tensor(rng.random((1, 1, 16, 16)), dtype=torch.float64)
    pred = idw.pseudo_depth_torch(gen)
    expected = float(np.mean(np.abs(pred.numpy() - label.numpy())))
    got = float(idw.geometry_loss(idw.pseudo_depth_torch, gen, label))
    assert got == pytest.approx(expected, abs=1e-9)


def test_pseudo_depth_torch_matches_numpy_twin():
    from sketchvision.sketchify import pseudo_depth

    rng = np.random.default_rng(4)
    img = rng.random((24, 24, 3)).astype(np.float32)
    a = idw.pseudo_depth_torch(idw.img_to_tensor(img).double()).numpy()[0, 0]
    b = pseudo_depth(img)[..., 0]
    assert a == pytest.approx(b, abs=1e-5)


def test_style_loss_identical_zero():
    f = [torch.rand(1, 4, 8, 8), torch.rand(1, 8, 4, 4)]
    assert float(idw.style_loss(f, [t.clone() for t in f])) == pytest.approx(0.0)


def test_style_loss_zero_features():
    ref = [torch.rand(1, 4, 8, 8)]
    zero = [torch.zeros(1, 4, 8, 8)]
    expected = float((idw.gram_matrix(ref[0]) ** 2).mean())
    assert float(idw.style_loss(zero, ref)) == pytest.approx(expected, abs=1e-9)


def test_style_loss_hand_computed_gram():
    # single 2-channel 1x2 feature map: F = [[a, b], [c, d]]
    a, b, c, d = 0.5, -1.0, 2.0, 0.25
    feat = torch.tensor([[[[a, b]], [[c, d]]]])  # (1, 2, 1, 2)
    norm = 2 * 1 * 2
    gram = np.array([[a * a + b * b, a * c + b * d],
                     [a * c + b * d, c * c + d * d]]) / norm
    got = idw.gram_matrix(feat).numpy()[0]
    assert got == pytest.approx(gram, abs=1e-9)
    other = torch.zeros_like(feat)
    expected_loss = float((gram ** 2).mean())
    assert float(idw.style_loss([other], [feat])) == pytest.approx(expected_loss, abs=1e-9)


def test_style_loss_1x1_spatial_permutation_invariant():
    # with 1x1 spatial maps a spatial permutation is the identity, so the
    # Gram loss between a map and its permutation is zero
    feat = torch.rand(1, 6, 1, 1)
    assert float(idw.style_loss([feat], [feat.clone()])) == 0.0
