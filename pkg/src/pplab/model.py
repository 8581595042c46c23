"""Word-level LSTM language model with tied embeddings and DropConnect."""
from __future__ import annotations

from dataclasses import dataclass, replace

import torch

from .corpus import Vocabulary

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LMConfig:
    embedding_dim: int = 200
    layer_dims: tuple[int, ...] = (800, 200)
    tie_embeddings: bool = True
    weight_drop: float = 0.5
    batch_size: int = 20
    bptt_window: int = 10
    epochs: int = 20
    learning_rate: float = 20.0
    grad_clip: float = 0.25
    seed: int = 0
    averaging_start: int | None = None  # epoch index; None disables tail averaging
    precision: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(self.layer_dims))
        if self.tie_embeddings and self.layer_dims[-1] != self.embedding_dim:
            raise ModelError(
                f"tied embeddings require last layer dim {self.layer_dims[-1]} "
                f"== embedding_dim {self.embedding_dim}")
        if self.learning_rate <= 0:
            raise ModelError("learning_rate must be positive")
        if self.bptt_window < 1 or self.batch_size < 1:
            raise ModelError("bptt_window and batch_size must be >= 1")
        if not 0.0 <= self.weight_drop < 1.0:
            raise ModelError("weight_drop must be in [0, 1)")
        if self.epochs < 1:
            raise ModelError("epochs must be >= 1")
        if self.precision not in _DTYPES:
            raise ModelError(f"precision must be one of {sorted(_DTYPES)}")

    @property
    def dtype(self) -> torch.dtype:
        return _DTYPES[self.precision]

    def to_dict(self) -> dict:
        return {
            "embedding_dim": self.embedding_dim,
            "layer_dims": list(self.layer_dims),
            "tie_embeddings": self.tie_embeddings,
            "weight_drop": self.weight_drop,
            "batch_size": self.batch_size,
            "bptt_window": self.bptt_window,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "grad_clip": self.grad_clip,
            "seed": self.seed,
            "averaging_start": self.averaging_start,
            "precision": self.precision,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LMConfig":
        return cls(**{**d, "layer_dims": tuple(d["layer_dims"])})


class LMState:
    """Per-layer (hidden, cell) pairs; zero at sequence start."""

    def __init__(self, layers: list[tuple[torch.Tensor, torch.Tensor]]):
        self.layers = layers

    @classmethod
    def zeros(cls, config: LMConfig, batch: int, dtype: torch.dtype) -> "LMState":
        return cls([(torch.zeros(batch, h, dtype=dtype),
                     torch.zeros(batch, h, dtype=dtype))
                    for h in config.layer_dims])

    def detach(self) -> "LMState":
        return LMState([(h.detach(), c.detach()) for h, c in self.layers])


class LMParameters:
    """Complete trainable state of one language model.

    Gate layout in the fused weight matrices is (input, forget, cell, output)
    stacked along the first axis. With tying, the output projection is the
    embedding matrix itself (no separate tensor).
    """

    def __init__(self, config: LMConfig, vocab: Vocabulary,
                 tensors: dict[str, torch.Tensor]):
        self.config = config
        self.vocab = vocab
        self.tensors = tensors
        self._validate()

    # ordered tensor names; the checkpoint manifest follows this order
    def tensor_names(self) -> list[str]:
        names = ["embedding"]
        for l in range(len(self.config.layer_dims)):
            names += [f"w_{l}", f"u_{l}", f"b_{l}"]
        if not self.config.tie_embeddings:
            names.append("output_weight")
        names.append("output_bias")
        return names

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        cfg = self.config
        v = len(self.vocab)
        shapes = {"embedding": (v, cfg.embedding_dim)}
        in_dim = cfg.embedding_dim
        for l, h in enumerate(cfg.layer_dims):
            shapes[f"w_{l}"] = (4 * h, in_dim)
            shapes[f"u_{l}"] = (4 * h, h)
            shapes[f"b_{l}"] = (4 * h,)
            in_dim = h
        if not cfg.tie_embeddings:
            shapes["output_weight"] = (v, cfg.layer_dims[-1])
        shapes["output_bias"] = (v,)
        return shapes

    def _validate(self):
        expected = self.expected_shapes()
        if set(self.tensors) != set(expected):
            raise ModelError(
                f"tensor set mismatch: have {sorted(self.tensors)}, "
                f"expect {sorted(expected)}")
        for name, shape in expected.items():
            t = self.tensors[name]
            if tuple(t.shape) != shape:
                raise ModelError(f"{name}: shape {tuple(t.shape)} != {shape}")
            if not torch.isfinite(t).all():
                raise ModelError(f"{name}: non-finite entries")

    def clone(self) -> "LMParameters":
        return LMParameters(self.config, self.vocab,
                            {k: v.detach().clone() for k, v in self.tensors.items()})

    def to_dtype(self, dtype: torch.dtype) -> "LMParameters":
        precision = "float64" if dtype == torch.float64 else "float32"
        cfg = replace(self.config, precision=precision)
        return LMParameters(cfg, self.vocab,
                            {k: v.detach().to(dtype) for k, v in self.tensors.items()})

    @property
    def output_weight(self) -> torch.Tensor:
        if self.config.tie_embeddings:
            return self.tensors["embedding"]
        return self.tensors["output_weight"]

    def init_state(self, batch: int = 1) -> LMState:
        return LMState.zeros(self.config, batch, self.tensors["embedding"].dtype)


def init_params(config: LMConfig, vocab: Vocabulary, seed: int,
                pretrained=None) -> LMParameters:
    """Deterministic initialization; optional pre-trained embedding injection.

    Embeddings: uniform in [-0.1, 0.1]. Recurrent/input weights: uniform
    scaled by 1/sqrt(hidden). Biases: zero. Words found in the pre-trained
    table (including subword composition) copy its vectors verbatim.
    """
    if len(vocab) == 0:
        raise ModelError("empty vocabulary")
    gen = torch.Generator().manual_seed(seed)
    dtype = config.dtype
    v = len(vocab)
    tensors: dict[str, torch.Tensor] = {}
    emb = (torch.rand(v, config.embedding_dim, generator=gen, dtype=dtype)
           * 0.2 - 0.1)
    if pretrained is not None:
        if pretrained.dim != config.embedding_dim:
            raise ModelError(
                f"pretrained embedding dim {pretrained.dim} != "
                f"embedding_dim {config.embedding_dim}")
        for i, word in enumerate(vocab.id_to_token):
            vec = pretrained.lookup(word)
            if vec is not None:
                emb[i] = torch.as_tensor(vec, dtype=dtype)
    tensors["embedding"] = emb
    in_dim = config.embedding_dim
    for l, h in enumerate(config.layer_dims):
        k = 1.0 / h ** 0.5
        tensors[f"w_{l}"] = (torch.rand(4 * h, in_dim, generator=gen, dtype=dtype)
                             * 2 * k - k)
        tensors[f"u_{l}"] = (torch.rand(4 * h, h, generator=gen, dtype=dtype)
                             * 2 * k - k)
        tensors[f"b_{l}"] = torch.zeros(4 * h, dtype=dtype)
        in_dim = h
    if not config.tie_embeddings:
        k = 1.0 / config.layer_dims[-1] ** 0.5
        tensors["output_weight"] = (
            torch.rand(v, config.layer_dims[-1], generator=gen, dtype=dtype)
            * 2 * k - k)
    tensors["output_bias"] = torch.zeros(v, dtype=dtype)
    return LMParameters(config, vocab, tensors)


def forward(params: LMParameters, input_ids: torch.Tensor, state: LMState,
            train: bool = False,
            generator: torch.Generator | None = None
            ) -> tuple[torch.Tensor, LMState]:
    """Stateful forward pass.

    input_ids: (batch, window) int64. Returns logits (batch, window, |V|)
    and the post-window state. DropConnect masks the recurrent matrices,
    sampled once per call, training only.
    """
    cfg = params.config
    if input_ids.dim() != 2:
        raise ModelError("input_ids must be (batch, window)")
    if input_ids.numel() and (input_ids.min() < 0 or input_ids.max() >= len(params.vocab)):
        raise ModelError("token id out of range")
    batch, window = input_ids.shape
    if window == 0:
        v = len(params.vocab)
        return (torch.empty(batch, 0, v, dtype=params.tensors["embedding"].dtype),
                state)

    drop = cfg.weight_drop if train else 0.0
    u_eff = []
    for l in range(len(cfg.layer_dims)):
        u = params.tensors[f"u_{l}"]
        if drop > 0.0:
            with torch.no_grad():
                keep = (torch.rand(u.shape, generator=generator,
                                   dtype=u.dtype) >= drop).to(u.dtype)
            u = u * keep / (1.0 - drop)
        u_eff.append(u)

    x = params.tensors["embedding"][input_ids]  # (B, T, E)
    layers = list(state.layers)
    for l, hdim in enumerate(cfg.layer_dims):
        w = params.tensors[f"w_{l}"]
        b = params.tensors[f"b_{l}"]
        h, c = layers[l]
        pre_x = torch.einsum("bte,ge->btg", x, w) + b  # input contribution
        outs = []
        for t in range(window):
            gates = pre_x[:, t, :] + h @ u_eff[l].T
            i, f, g, o = gates.chunk(4, dim=1)
            c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
            h = torch.sigmoid(o) * torch.tanh(c)
            outs.append(h)
        x = torch.stack(outs, dim=1)
        layers[l] = (h, c)
    logits = torch.einsum("bth,vh->btv", x, params.output_weight) \
        + params.tensors["output_bias"]
    return logits, LMState(layers)
