"""SGD training with truncated backpropagation through time."""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .chat import TokenSequence
from .corpus import Vocabulary
from .model import LMConfig, LMParameters, forward


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainReport:
    epoch_losses: tuple[float, ...]
    final_loss: float
    epochs_run: int

    def to_dict(self) -> dict:
        return {"epoch_losses": list(self.epoch_losses),
                "final_loss": self.final_loss,
                "epochs_run": self.epochs_run}


def batchify(ids: list[int], batch_size: int, dtype=torch.int64) -> torch.Tensor:
    """Arrange a flat token stream into batch_size parallel columns,
    dropping the remainder tail. Shape: (batch_size, n)."""
    n = len(ids) // batch_size
    data = torch.tensor(ids[: n * batch_size], dtype=dtype)
    return data.view(batch_size, n)


def encode_corpus(train_seqs: list[TokenSequence], vocab: Vocabulary) -> list[int]:
    """Concatenate transcripts into one stream, eos-separated."""
    ids: list[int] = []
    for seq in train_seqs:
        ids.extend(vocab.encode(seq.tokens))
        if not seq.tokens or seq.tokens[-1] != vocab.id_to_token[vocab.eos_id]:
            ids.append(vocab.eos_id)
    return ids


def train(train_seqs: list[TokenSequence], config: LMConfig, vocab: Vocabulary,
          init: LMParameters) -> tuple[LMParameters, TrainReport]:
    """Plain SGD over truncated-BPTT windows; optional tail averaging.

    Deterministic for a fixed config.seed (DropConnect masks come from a
    private generator). The initial parameters are not mutated.
    """
    ids = encode_corpus(train_seqs, vocab)
    needed = config.batch_size * (config.bptt_window + 1)
    if len(ids) < needed:
        raise TrainingError(
            f"corpus of {len(ids)} tokens is too small for batch_size="
            f"{config.batch_size} x (bptt_window+1)={config.bptt_window + 1}; "
            "reduce batch size or window")

    params = init.clone()
    for t in params.tensors.values():
        t.requires_grad_(True)
    gen = torch.Generator().manual_seed(config.seed)
    data = batchify(ids, config.batch_size)
    nwin = (data.shape[1] - 1 + config.bptt_window - 1) // config.bptt_window

    averaged: dict[str, torch.Tensor] | None = None
    avg_count = 0
    epoch_losses: list[float] = []
    names = params.tensor_names()
    for epoch in range(config.epochs):
        state = params.init_state(config.batch_size)
        total, count = 0.0, 0
        for w in range(nwin):
            lo = w * config.bptt_window
            hi = min(lo + config.bptt_window, data.shape[1] - 1)
            x = data[:, lo:hi]
            y = data[:, lo + 1:hi + 1]
            logits, state = forward(params, x, state, train=True, generator=gen)
            loss = torch.nn.functional.cross_entropy(
                logits.reshape(-1, logits.shape[-1]), y.reshape(-1))
            loss.backward()
            with torch.no_grad():
                torch.nn.utils.clip_grad_norm_(params.tensors.values(),
                                               config.grad_clip)
                for t in params.tensors.values():
                    if t.grad is not None:
                        t -= config.learning_rate * t.grad
                        t.grad = None
                if (config.averaging_start is not None
                        and epoch >= config.averaging_start):
                    if averaged is None:
                        averaged = {n: params.tensors[n].detach().clone()
                                    for n in names}
                        avg_count = 1
                    else:
                        avg_count += 1
                        for n in names:
                            averaged[n] += ((params.tensors[n].detach()
                                             - averaged[n]) / avg_count)
            state = state.detach()
            total += float(loss.detach()) * y.numel()
            count += y.numel()
        epoch_losses.append(total / count)

    final = params.clone()
    if averaged is not None:
        final = LMParameters(config, vocab,
                             {n: averaged[n].clone() for n in names})
    for t in final.tensors.values():
        t.requires_grad_(False)
    report = TrainReport(epoch_losses=tuple(epoch_losses),
                         final_loss=epoch_losses[-1],
                         epochs_run=config.epochs)
    return final, report


def perplexity(params: LMParameters, seq: TokenSequence) -> float:
    """exp(mean token cross-entropy), one stateful batch-of-one pass over
    the full transcript; loss accumulated in double precision."""
    if not len(seq.tokens):
        raise TrainingError("cannot score an empty sequence")
    ids = params.vocab.encode(seq.tokens)
    targets = torch.tensor(ids, dtype=torch.int64)
    inputs = torch.tensor([params.vocab.eos_id] + ids[:-1], dtype=torch.int64)
    with torch.no_grad():
        logits, _ = forward(params, inputs.unsqueeze(0), params.init_state(1))
        losses = torch.nn.functional.cross_entropy(
            logits.squeeze(0).double(), targets, reduction="none")
    return float(torch.exp(losses.mean()))
