"""Encoder-decoder ASR network with vanilla, ASCD and S-ASCD decoders.

Shapes below use B (batch), T (stacked acoustic frames), N (decoder input
length), D (``d_model``) and V (vocabulary).  All three decoders share the
encoder, the final layer norm and the output head; they differ in how the
semantic stream meets the acoustic one:

* ``vanilla``: causal self-attention, then cross-attention into the encoder
  output, then FFN.
* ``ascd``: acoustic and semantic rows are projected, concatenated along time
  and updated together by one masked self-attention + FFN per layer.
* ``s-ascd``: only semantic rows are queries; keys/values are the raw
  ``[acoustic; semantic]`` state and acoustic rows are never updated.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import masking
from .tensor import (
    Parameter,
    Tensor,
    concat,
    count_scope,
    cross_entropy,
    embedding,
    layer_norm,
    matmul,
    no_grad,
    record_score_elements,
    relu,
    softmax_masked,
)

PAD_ID = 0
SOS_EOS_ID = 1
FIRST_TOKEN_ID = 2
VARIANTS = ("vanilla", "ascd", "s-ascd")
LAYER_NORM_EPS = 1e-12


@dataclass
class ModelConfig:
    d_model: int = 64
    d_embed: int = 64
    d_ff: int = 256
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    vocab_size: int = 18
    feat_dim: int = 20
    variant: str = "ascd"
    max_positions: int = 256

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.vocab_size < 3:
            raise ValueError("vocab_size must cover <pad>, <sos/eos> and at least one token")
        for name in ("d_model", "d_embed", "d_ff", "n_heads", "feat_dim", "max_positions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown ModelConfig fields: {sorted(unknown)}")
        return cls(**d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ModelConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class AttentionRecord:
    layer: int
    head: int
    weights: np.ndarray
    t_boundary: int
    kind: str = "decoder"
    utterance: int = 0


def sinusoidal_encoding(positions, d: int) -> np.ndarray:
    """Sin on even channels, cos on odd channels; ``positions`` may be any shape."""
    positions = np.asarray(positions, dtype=np.float64)
    channel = np.arange(d)
    rates = 1.0 / np.power(10000.0, (channel - channel % 2) / d)
    angles = positions[..., None] * rates
    return np.where(channel % 2 == 0, np.sin(angles), np.cos(angles))


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


class Module:
    """Parameter container; children and lists of children are discovered by attribute."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, list) and value and isinstance(value[0], Module):
                for i, child in enumerate(value):
                    yield from child.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        bound = 1.0 / math.sqrt(d_in)
        self.weight = Parameter(rng.uniform(-bound, bound, size=(d_in, d_out)))
        self.bias = Parameter(np.zeros(d_out))

    def __call__(self, x):
        return matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = Parameter(np.ones(d))
        self.bias = Parameter(np.zeros(d))

    def __call__(self, x):
        return layer_norm(x, self.gain, self.bias, LAYER_NORM_EPS)


class FeedForward(Module):
    def __init__(self, d: int, d_ff: int, rng):
        self.w1 = Linear(d, d_ff, rng)
        self.w2 = Linear(d_ff, d, rng)

    def __call__(self, x):
        return self.w2(relu(self.w1(x)))


class MultiHeadAttention(Module):
    def __init__(self, d: int, n_heads: int, rng):
        self.n_heads = n_heads
        bound = 1.0 / math.sqrt(d)
        for name in ("q", "k", "v", "o"):
            setattr(self, "w" + name, Parameter(rng.uniform(-bound, bound, size=(d, d))))
            setattr(self, "b" + name, Parameter(np.zeros(d)))

    def __call__(self, query, key_value, blocked: np.ndarray):
        """``query`` [B, nq, D], ``key_value`` [B, nk, D], ``blocked`` [B, nq, nk].

        Returns the attended output [B, nq, D] and weights [B, H, nq, nk].
        """
        B, nq, d = query.shape
        nk = key_value.shape[1]
        H = self.n_heads
        dh = d // H
        q = (matmul(query, self.wq) + self.bq).reshape(B, nq, H, dh).transpose(0, 2, 1, 3)
        k = (matmul(key_value, self.wk) + self.bk).reshape(B, nk, H, dh).transpose(0, 2, 3, 1)
        v = (matmul(key_value, self.wv) + self.bv).reshape(B, nk, H, dh).transpose(0, 2, 1, 3)
        scores = matmul(q, k) * (1.0 / math.sqrt(dh))
        record_score_elements(B * H * nq * nk)
        weights = softmax_masked(scores, blocked[:, None, :, :])
        context = matmul(weights, v).transpose(0, 2, 1, 3).reshape(B, nq, d)
        return matmul(context, self.wo) + self.bo, weights


class EncoderLayer(Module):
    def __init__(self, cfg: ModelConfig, rng):
        self.norm1 = LayerNorm(cfg.d_model)
        self.mha = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.norm2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)

    def __call__(self, x, blocked):
        h = self.norm1(x)
        attended, weights = self.mha(h, h, blocked)
        x = x + attended
        return x + self.ffn(self.norm2(x)), weights


class ASCDLayer(Module):
    """One self-attention + FFN block over the whole multimodal sequence."""

    def __init__(self, cfg: ModelConfig, rng):
        self.norm1 = LayerNorm(cfg.d_model)
        self.mha = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.norm2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)

    def __call__(self, m, blocked):
        h = self.norm1(m)
        attended, weights = self.mha(h, h, blocked)
        m = m + attended
        return m + self.ffn(self.norm2(m)), weights

    def update_semantic(self, acoustic, semantic, blocked):
        """Same layer, computing only the semantic rows given this layer's acoustic input.

        Valid because acoustic rows never attend to semantic keys, so the
        acoustic track can be run on its own and reused.
        """
        hs = self.norm1(semantic)
        kv = concat([self.norm1(acoustic), hs], axis=1)
        attended, weights = self.mha(hs, kv, blocked)
        s = semantic + attended
        return s + self.ffn(self.norm2(s)), weights


class SemiASCDLayer(Module):
    def __init__(self, cfg: ModelConfig, rng):
        self.norm1 = LayerNorm(cfg.d_model)
        self.mha = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.norm2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)

    def __call__(self, acoustic, semantic, blocked):
        """Queries are normalized semantic rows; keys/values are the raw ``[acoustic; semantic]``."""
        kv = concat([acoustic, semantic], axis=1)
        attended, weights = self.mha(self.norm1(semantic), kv, blocked)
        s = semantic + attended
        return s + self.ffn(self.norm2(s)), weights


class VanillaDecoderLayer(Module):
    # norm1 is shared by the self- and cross-attention sublayers, so this layer
    # carries exactly one attention block more than an ASCD layer
    def __init__(self, cfg: ModelConfig, rng):
        self.norm1 = LayerNorm(cfg.d_model)
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.norm2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)

    def __call__(self, s, a, self_blocked, cross_blocked):
        h = self.norm1(s)
        attended, w_self = self.self_attn(h, h, self_blocked)
        s = s + attended
        attended, w_cross = self.cross_attn(self.norm1(s), a, cross_blocked)
        s = s + attended
        return s + self.ffn(self.norm2(s)), w_self, w_cross


class Encoder(Module):
    """2-frame stacking, linear projection, sinusoidal PE, pre-norm transformer layers."""

    def __init__(self, cfg: ModelConfig, rng):
        self.cfg = cfg
        self.input = Linear(2 * cfg.feat_dim, cfg.d_model, rng)
        self.layers = [EncoderLayer(cfg, rng) for _ in range(cfg.n_encoder_layers)]
        self.norm = LayerNorm(cfg.d_model)

    def __call__(self, features: np.ndarray, frame_lengths, records=None):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 2:
            features = features[None]
        B, T0, F = features.shape
        if F != self.cfg.feat_dim:
            raise ValueError(f"feature dim {F} != config feat_dim {self.cfg.feat_dim}")
        lengths = np.asarray(frame_lengths, dtype=np.int64).reshape(B)
        if T0 < 2 or lengths.min() < 2:
            raise ValueError(f"input too short: need at least 2 frames, got {lengths.min()}")
        if lengths.max() > T0:
            raise ValueError(f"frame length {lengths.max()} exceeds padded length {T0}")
        T = T0 // 2
        if T > self.cfg.max_positions:
            raise ValueError(f"{T} acoustic positions exceed max_positions={self.cfg.max_positions}")
        valid_T = lengths // 2
        stacked = features[:, : 2 * T].reshape(B, T, 2 * F)
        x = self.input(Tensor(stacked)) + sinusoidal_encoding(np.arange(T), self.cfg.d_model)
        blocked = np.stack([masking.self_attention_padding(T, int(v)) for v in valid_T])
        for i, layer in enumerate(self.layers):
            with count_scope(f"encoder.layers.{i}"):
                x, w = layer(x, blocked)
            if records is not None:
                _record(records, w, i, valid_T, kind="encoder", t_boundary=T)
        return self.norm(x), valid_T


def _record(records, weights, layer, t_boundaries, kind, t_boundary=None):
    data = weights.data
    for b in range(data.shape[0]):
        tb = int(t_boundaries[b]) if t_boundary is None else t_boundary
        for h in range(data.shape[1]):
            records.append(AttentionRecord(layer, h, data[b, h].copy(), tb, kind, b))


@dataclass
class ForwardOutput:
    logits: Tensor
    acoustic: Tensor | None = None
    records: list[AttentionRecord] = field(default_factory=list)
    states: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# the full model
# ---------------------------------------------------------------------------


class ASRModel(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(cfg, rng)
        self.embed = Parameter(rng.normal(0.0, cfg.d_embed**-0.5, size=(cfg.vocab_size, cfg.d_embed)))
        if cfg.variant == "vanilla":
            if cfg.d_embed != cfg.d_model:
                self.embed_proj = Linear(cfg.d_embed, cfg.d_model, rng)
            self.layers = [VanillaDecoderLayer(cfg, rng) for _ in range(cfg.n_decoder_layers)]
        else:
            self.proj_acoustic = Linear(cfg.d_model, cfg.d_model, rng)
            self.proj_semantic = Linear(cfg.d_embed, cfg.d_model, rng)
            layer_cls = ASCDLayer if cfg.variant == "ascd" else SemiASCDLayer
            self.layers = [layer_cls(cfg, rng) for _ in range(cfg.n_decoder_layers)]
        self.norm = LayerNorm(cfg.d_model)
        self.output = Linear(cfg.d_model, cfg.vocab_size, rng)

    @property
    def variant(self) -> str:
        return self.cfg.variant

    # -- pieces ------------------------------------------------------------

    def encode(self, features, frame_lengths, records=None):
        """Acoustic embedding ``[B, T, D]`` and per-utterance valid T."""
        return self.encoder(features, frame_lengths, records)

    def embed_tokens(self, ids) -> Tensor:
        return embedding(self.embed, ids)

    def _semantic_positions(self, valid_T, N):
        return np.asarray(valid_T)[:, None] + np.arange(N)[None, :]

    def build_multimodal(self, acoustic: Tensor, semantic: Tensor, valid_T=None):
        """Project both streams to D, concatenate along time and add PE.

        Semantic token j of utterance b sits at position ``valid_T[b] + j``,
        so padding the acoustic block does not shift the token positions.
        """
        B, T, _ = acoustic.shape
        N = semantic.shape[1]
        valid_T = np.full(B, T) if valid_T is None else np.asarray(valid_T)
        if T + N > self.cfg.max_positions:
            raise ValueError(f"T + N = {T + N} exceeds max_positions={self.cfg.max_positions}")
        d = self.cfg.d_model
        pa = self.proj_acoustic(acoustic) + sinusoidal_encoding(np.arange(T), d)
        ps = self.proj_semantic(semantic) + sinusoidal_encoding(self._semantic_positions(valid_T, N), d)
        return concat([pa, ps], axis=1)

    def head(self, semantic: Tensor) -> Tensor:
        return self.output(self.norm(semantic))

    # -- teacher forcing ---------------------------------------------------

    def forward(
        self,
        features,
        frame_lengths,
        dec_in,
        dec_lengths,
        capture: bool = False,
        capture_encoder: bool = False,
        keep_states: bool = False,
    ) -> ForwardOutput:
        """Teacher-forced logits ``[B, N, V]`` for decoder inputs ``dec_in`` ``[B, N]``."""
        dec_in = np.asarray(dec_in, dtype=np.int64)
        if dec_in.ndim == 1:
            dec_in = dec_in[None]
        dec_lengths = np.asarray(dec_lengths, dtype=np.int64).reshape(dec_in.shape[0])
        if dec_in.shape[1] == 0 or dec_lengths.min() < 1:
            raise ValueError("empty decoder input")
        records = [] if capture else None
        acoustic, valid_T = self.encode(
            features, frame_lengths, records if capture_encoder else None
        )
        semantic = self.embed_tokens(dec_in)
        B, T, _ = acoustic.shape
        N = dec_in.shape[1]
        out = ForwardOutput(logits=None, records=records if records is not None else [])

        if self.variant == "vanilla":
            s = semantic if self.cfg.d_embed == self.cfg.d_model else self.embed_proj(semantic)
            s = s + sinusoidal_encoding(np.arange(N), self.cfg.d_model)
            self_blocked = np.stack([masking.causal_self_mask(N, int(n)) for n in dec_lengths])
            cross_blocked = np.stack([masking.cross_padding_mask(N, T, int(v)) for v in valid_T])
            for i, layer in enumerate(self.layers):
                with count_scope(f"decoder.layers.{i}"):
                    s, w_self, w_cross = layer(s, acoustic, self_blocked, cross_blocked)
                if capture:
                    _record(records, w_self, i, valid_T, kind="self", t_boundary=0)
                    _record(records, w_cross, i, valid_T, kind="cross")
                if keep_states:
                    out.states.append((acoustic.data, s.data))
            out.logits = self.head(s)
            out.acoustic = acoustic
            return out

        m = self.build_multimodal(acoustic, semantic, valid_T)
        if self.variant == "ascd":
            blocked = np.stack(
                [
                    masking.build_ascd_mask(T, N, int(v), int(n)).blocked
                    for v, n in zip(valid_T, dec_lengths)
                ]
            )
            for i, layer in enumerate(self.layers):
                with count_scope(f"decoder.layers.{i}"):
                    m, w = layer(m, blocked)
                if capture:
                    _record(records, w, i, np.full(B, T), kind="ascd")
                if keep_states:
                    out.states.append((m.data[:, :T], m.data[:, T:]))
            out.acoustic = m[:, :T]
            out.logits = self.head(m[:, T:])
            return out

        blocked = np.stack(
            [
                masking.build_s_ascd_mask(T, N, int(v), int(n)).blocked
                for v, n in zip(valid_T, dec_lengths)
            ]
        )
        a, s = m[:, :T], m[:, T:]
        for i, layer in enumerate(self.layers):
            with count_scope(f"decoder.layers.{i}"):
                s, w = layer(a, s, blocked)
            if capture:
                _record(records, w, i, np.full(B, T), kind="s-ascd")
            if keep_states:
                out.states.append((a.data, s.data))
        out.acoustic = a
        out.logits = self.head(s)
        return out

    def loss(self, batch) -> Tensor:
        """Mean over utterances of the per-utterance token cross-entropy."""
        dec_in, targets, lengths = teacher_forcing(batch.token_ids, batch.token_lengths)
        logits = self.forward(batch.features, batch.frame_lengths, dec_in, lengths).logits
        total = None
        B = logits.shape[0]
        for b in range(B):
            ce = cross_entropy(logits[b], targets[b], ignore_index=PAD_ID)
            total = ce if total is None else total + ce
        return total * (1.0 / B)

    # -- incremental decoding ----------------------------------------------

    def acoustic_track(self, acoustic: Tensor):
        """Everything the decoder needs from the acoustic side, computed once.

        ``acoustic`` is a single unpadded utterance ``[1, T, D]``.
        """
        if self.variant == "vanilla":
            return acoustic
        T = acoustic.shape[1]
        d = self.cfg.d_model
        a = self.proj_acoustic(acoustic) + sinusoidal_encoding(np.arange(T), d)
        if self.variant == "s-ascd":
            return a
        open_keys = np.zeros((1, T, T), dtype=bool)
        states = []
        for layer in self.layers:
            states.append(a)
            a, _ = layer(a, open_keys)
        return states

    def prefix_logits(self, track, prefix, records=None) -> np.ndarray:
        """Logits ``[n, V]`` for every position of the decoder-input ``prefix``."""
        prefix = np.asarray(prefix, dtype=np.int64)[None]
        n = prefix.shape[1]
        semantic = self.embed_tokens(prefix)
        d = self.cfg.d_model
        if self.variant == "vanilla":
            T = track.shape[1]
            s = semantic if self.cfg.d_embed == d else self.embed_proj(semantic)
            s = s + sinusoidal_encoding(np.arange(n), d)
            self_blocked = masking.causal_self_mask(n)[None]
            cross_blocked = np.zeros((1, n, T), dtype=bool)
            for i, layer in enumerate(self.layers):
                s, w_self, w_cross = layer(s, track, self_blocked, cross_blocked)
                if records is not None:
                    _record(records, w_self, i, [T], kind="self", t_boundary=0)
                    _record(records, w_cross, i, [T], kind="cross")
            return self.head(s).data[0]

        first = track[0] if self.variant == "ascd" else track
        T = first.shape[1]
        if T + n > self.cfg.max_positions:
            raise ValueError(f"T + N = {T + n} exceeds max_positions={self.cfg.max_positions}")
        s = self.proj_semantic(semantic) + sinusoidal_encoding(T + np.arange(n), d)
        blocked = masking.build_s_ascd_mask(T, n).blocked[None]
        for i, layer in enumerate(self.layers):
            if self.variant == "ascd":
                s, w = layer.update_semantic(track[i], s, blocked)
            else:
                s, w = layer(track, s, blocked)
            if records is not None:
                _record(records, w, i, [T], kind=self.variant)
        return self.head(s).data[0]

    # -- persistence ------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"checkpoint is missing parameters: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ValueError(f"{name}: checkpoint shape {value.shape} != {p.data.shape}")
            p.data[...] = value


def teacher_forcing(token_ids, token_lengths):
    """Decoder inputs ``[<sos>, y1..yn]`` and targets ``[y1..yn, <eos>]``, padded with ``<pad>``."""
    token_ids = np.asarray(token_ids, dtype=np.int64)
    if token_ids.ndim == 1:
        token_ids = token_ids[None]
    lengths = np.asarray(token_lengths, dtype=np.int64).reshape(token_ids.shape[0])
    if lengths.min() < 1:
        raise ValueError("empty transcript")
    B, n_max = token_ids.shape
    dec_in = np.full((B, n_max + 1), PAD_ID, dtype=np.int64)
    targets = np.full((B, n_max + 1), PAD_ID, dtype=np.int64)
    for b, n in enumerate(lengths):
        dec_in[b, 0] = SOS_EOS_ID
        dec_in[b, 1 : n + 1] = token_ids[b, :n]
        targets[b, :n] = token_ids[b, :n]
        targets[b, n] = SOS_EOS_ID
    return dec_in, targets, lengths + 1


def zero_residual_branches(model: ASRModel):
    """Zero every attention output projection and second FFN linear (test helper)."""
    for name, p in model.named_parameters():
        if name.startswith("layers.") and (
            name.endswith(".wo") or name.endswith(".bo") or ".ffn.w2." in name
        ):
            p.data[...] = 0.0


# ---------------------------------------------------------------------------
# parameter counting
# ---------------------------------------------------------------------------


@dataclass
class ParameterCount:
    total: int
    breakdown: dict[str, int]


def count_parameters(cfg: ModelConfig) -> ParameterCount:
    """Exact parameter count from shape arithmetic (no model is built)."""
    D, F, V, De, dff = cfg.d_model, cfg.feat_dim, cfg.vocab_size, cfg.d_embed, cfg.d_ff

    def linear(i, o):
        return i * o + o

    norm = 2 * D
    attention = 4 * D * D + 4 * D
    ffn = linear(D, dff) + linear(dff, D)

    breakdown = {
        "encoder": linear(2 * F, D) + cfg.n_encoder_layers * (2 * norm + attention + ffn) + norm,
        "embedding": V * De,
    }
    if cfg.variant == "vanilla":
        breakdown["projections"] = linear(De, D) if De != D else 0
        breakdown["decoder_layers"] = cfg.n_decoder_layers * (2 * norm + 2 * attention + ffn)
    else:
        breakdown["projections"] = linear(D, D) + linear(De, D)
        breakdown["decoder_layers"] = cfg.n_decoder_layers * (2 * norm + attention + ffn)
    breakdown["output"] = norm + linear(D, V)
    return ParameterCount(sum(breakdown.values()), breakdown)


def enumerate_parameters(model: ASRModel) -> int:
    return sum(p.data.size for p in model.parameters())


def table1_config(variant: str) -> ModelConfig:
    """Transformer geometry with 256-d attention, 4 heads, 6 decoder layers."""
    return ModelConfig(
        d_model=256,
        d_embed=256,
        d_ff=2048,
        n_heads=4,
        n_encoder_layers=12,
        n_decoder_layers=6,
        vocab_size=4233,
        feat_dim=83,
        variant=variant,
        max_positions=5000,
    )
