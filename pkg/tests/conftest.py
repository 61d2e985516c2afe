import numpy as np
import pytest

from ascd.data import Utterance
from ascd.model import FIRST_TOKEN_ID, ASRModel, ModelConfig


def numeric_grad(f, x: np.ndarray, step=1e-6) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (mutated in place)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        plus = f()
        flat[i] = orig - step
        minus = f()
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * step)
    return grad


def rel_error(a, b, floor=1e-5):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def tiny_config(variant="ascd", **overrides) -> ModelConfig:
    params = dict(
        d_model=8, d_embed=8, d_ff=16, n_heads=2, n_encoder_layers=1,
        n_decoder_layers=2, vocab_size=6, feat_dim=5, variant=variant, max_positions=64,
    )
    params.update(overrides)
    return ModelConfig(**params)


def random_config(rng: np.random.Generator, variant: str) -> ModelConfig:
    n_heads = int(rng.integers(1, 3))
    d_model = n_heads * int(rng.integers(1, 9 // n_heads + 1)) * 2
    d_model = min(d_model, 16)
    return ModelConfig(
        d_model=d_model,
        d_embed=int(rng.choice([d_model, int(rng.integers(2, 12))])),
        d_ff=int(rng.integers(2, 20)),
        n_heads=n_heads,
        n_encoder_layers=int(rng.integers(0, 3)),
        n_decoder_layers=int(rng.integers(1, 4)),
        vocab_size=int(rng.integers(4, 9)),
        feat_dim=int(rng.integers(2, 6)),
        variant=variant,
        max_positions=64,
    )


def random_utterance(rng, cfg: ModelConfig, n_frames, n_tokens, uid="u") -> Utterance:
    feats = rng.normal(size=(n_frames, cfg.feat_dim))
    tokens = rng.integers(FIRST_TOKEN_ID, cfg.vocab_size, size=n_tokens).tolist()
    return Utterance(uid, feats, tokens)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["vanilla", "ascd", "s-ascd"])
def variant(request):
    return request.param


@pytest.fixture
def tiny_model(variant):
    return ASRModel(tiny_config(variant), seed=3)
