import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from newsseg.errors import EmptyInput, ShapeError, ValidationError
from newsseg.models import (
    AudioTransformer,
    CnnConfig,
    FusionClassifier,
    OneVsAll,
    ResidualCNN,
    TransformerConfig,
    VideoTransformer,
    argmax_label_index,
    binary_suite,
    binary_wrap,
    build_model,
    frame_vote,
    relabel,
    softmax,
)
from newsseg.models.config import MODEL_KINDS, TRAIN_PRESETS, train_preset
from newsseg.timeline import LABELS, SceneLabel

TINY = TransformerConfig(layers=1, heads=2, hidden=8, patch=8, image_size=16, num_frames=4, spec_frames=10)


class TestSoftmax:
    def test_known_values(self):
        p = softmax([0.0, np.log(3.0)])
        np.testing.assert_allclose(p, [0.25, 0.75])

    def test_extreme_logits(self):
        p = softmax([1e4, -1e4, 0.0])
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p, [1.0, 0.0, 0.0])

    @given(arrays(np.float64, st.integers(1, 10), elements=st.floats(-1e4, 1e4)))
    def test_is_distribution_and_shift_invariant(self, z):
        p = softmax(z)
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(softmax(z + 17.5), p, atol=1e-12)
        assert p[int(np.argmax(z))] == p.max()


class TestFrameVote:
    def test_mean(self):
        votes = [[1, 0, 0, 0, 0]] * 9 + [[0, 1, 0, 0, 0]] * 7
        p = frame_vote(votes)
        assert p[0] == pytest.approx(9 / 16) == pytest.approx(0.5625)
        assert argmax_label_index(p) == 0

    def test_single_frame(self):
        np.testing.assert_allclose(frame_vote([[0.1, 0.2, 0.3, 0.2, 0.2]]), [0.1, 0.2, 0.3, 0.2, 0.2])

    def test_order_invariant(self):
        rng = np.random.default_rng(0)
        votes = softmax(rng.normal(size=(16, 5)))
        np.testing.assert_allclose(frame_vote(votes), frame_vote(votes[rng.permutation(16)]))

    def test_empty(self):
        with pytest.raises(EmptyInput):
            frame_vote([])

    def test_tie_goes_low(self):
        assert argmax_label_index([0.0, 0.5, 0.5, 0, 0]) == 1


class TestTokenCounts:
    def test_video_16_and_32_frames(self):
        for frames, tokens in [(16, 1569), (32, 3137)]:
            cfg = TransformerConfig(layers=1, heads=2, hidden=8, num_frames=frames)
            model = VideoTransformer(cfg)
            seq = model.token_sequence(torch.zeros(1, frames, 224, 224, 3))
            assert seq.shape == (1, tokens, 8)

    def test_audio_33_tokens(self):
        model = AudioTransformer(TransformerConfig(layers=1, heads=2, hidden=8))
        assert model.token_sequence(torch.randn(2, 128, 51)).shape == (2, 33, 8)

    def test_fusion_width(self):
        assert FusionClassifier(TransformerConfig()).fusion_input_width == 768

    def test_wrong_frame_count(self):
        model = VideoTransformer(TINY)
        with pytest.raises(ShapeError):
            model(torch.zeros(1, 6, 16, 16, 3))

    def test_wrong_mels(self):
        with pytest.raises(ShapeError):
            AudioTransformer(TINY)(torch.zeros(1, 64, 10))


class TestForward:
    def test_output_shapes(self):
        clip = torch.rand(3, 4, 16, 16, 3)
        spec = torch.randn(3, 128, 10)
        assert VideoTransformer(TINY)(clip).shape == (3, 5)
        assert AudioTransformer(TINY)(spec).shape == (3, 5)
        assert FusionClassifier(TINY)(clip, spec).shape == (3, 5)
        assert ResidualCNN(CnnConfig(widths=(4, 8, 8, 8), blocks=(1, 1, 1, 1), image_size=32))(torch.rand(2, 32, 32, 3)).shape == (2, 5)

    def test_zero_head_gives_equal_logits(self):
        model = VideoTransformer(TINY).eval()
        with torch.no_grad():
            model.head.weight.zero_()
            model.head.bias.zero_()
            p = softmax(model(torch.rand(2, 4, 16, 16, 3)).numpy())
        np.testing.assert_allclose(p, 0.2)

    def test_head_permutation(self):
        model = AudioTransformer(TINY).eval()
        spec = torch.randn(2, 128, 10)
        perm = torch.tensor([3, 0, 4, 1, 2])
        with torch.no_grad():
            before = model(spec)
            model.head.weight.copy_(model.head.weight[perm])
            model.head.bias.copy_(model.head.bias[perm])
            after = model(spec)
        torch.testing.assert_close(after, before[:, perm])

    def test_deterministic_construction(self):
        torch.manual_seed(5)
        a = FusionClassifier(TINY)
        torch.manual_seed(5)
        b = FusionClassifier(TINY)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb and torch.equal(pa, pb)

    def test_eval_is_deterministic(self):
        model = FusionClassifier(TINY).eval()
        clip, spec = torch.rand(1, 4, 16, 16, 3), torch.randn(1, 128, 10)
        with torch.no_grad():
            assert torch.equal(model(clip, spec), model(clip, spec))

    def test_audio_gain_invariance(self):
        # the frontend standardises each spectrogram, so a constant log offset drops out
        model = AudioTransformer(TINY).eval()
        spec = torch.randn(1, 128, 10)
        with torch.no_grad():
            torch.testing.assert_close(model(spec), model(spec + 3.0), rtol=1e-4, atol=1e-5)


class TestBinary:
    def test_relabel(self):
        assert relabel(SceneLabel.STORY, SceneLabel.STORY) == 0
        assert relabel(SceneLabel.STUDIO.index, SceneLabel.STORY) == 1
        assert relabel("Transition", "Transition") == 0

    def test_suite(self):
        suite = binary_suite("vivit", TINY)
        assert set(suite) == set(LABELS)
        for label, model in suite.items():
            assert isinstance(model, OneVsAll)
            assert model.kind == f"binary:{label.value}:vivit"
            assert model(torch.rand(2, 4, 16, 16, 3)).shape == (2, 2)

    def test_wrap_keeps_backbone_shape(self):
        m = binary_wrap("ast", TINY, "Studio")
        assert m.config.num_classes == 2 and m.arch == "ast"


class TestRegistry:
    def test_unknown_arch(self):
        with pytest.raises(ValidationError):
            build_model("lstm")

    def test_presets(self):
        for name in ("vivit", "ast", "vivit-ast"):
            cfg = TRAIN_PRESETS[name]
            assert cfg.optimizer == "adamw" and cfg.learning_rate == 5e-3 and cfg.batch_size == 16
            assert cfg.effective_weight_decay == 0.01
        img = TRAIN_PRESETS["image"]
        assert (img.optimizer, img.learning_rate, img.batch_size, img.max_epochs) == ("adam", 1e-4, 32, 100)
        assert img.weighted_sampling and img.effective_weight_decay == 0.0
        assert TRAIN_PRESETS["vivit-ast-l"].batch_size == 8
        assert train_preset("binary:Story").batch_size == 8

    def test_model_kinds(self):
        assert set(MODEL_KINDS) >= {"frame", "vivit", "ast", "fusion", "fusion-l"}
        assert MODEL_KINDS["fusion-l"][2] == 32

    def test_default_config_matches_reference_sizes(self):
        cfg = TransformerConfig()
        assert (cfg.layers, cfg.heads, cfg.hidden, cfg.mlp_dim) == (6, 6, 384, 1536)
