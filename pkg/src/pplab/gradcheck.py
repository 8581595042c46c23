"""Analytic-vs-numeric gradient verification for the LSTM."""
from __future__ import annotations

import torch

from .chat import TokenSequence
from .corpus import Vocabulary
from .model import LMConfig, LMParameters, forward, init_params


def _total_loss(params: LMParameters, inputs: torch.Tensor,
                targets: torch.Tensor) -> torch.Tensor:
    logits, _ = forward(params, inputs, params.init_state(inputs.shape[0]))
    return torch.nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1),
        reduction="sum")


def gradient_check(config: LMConfig, vocab: Vocabulary, seq: TokenSequence,
                   epsilon: float = 1e-5, seed: int = 0,
                   tensor_names: list[str] | None = None) -> float:
    """Max relative error between backprop and central finite differences.

    Runs in double precision with DropConnect off; meant for tiny models
    (every parameter entry is perturbed twice).
    """
    params = init_params(config, vocab, seed=seed).to_dtype(torch.float64)
    ids = params.vocab.encode(seq.tokens)
    inputs = torch.tensor([[params.vocab.eos_id] + ids[:-1]], dtype=torch.int64)
    targets = torch.tensor([ids], dtype=torch.int64)

    names = tensor_names or params.tensor_names()
    for n in names:
        params.tensors[n].requires_grad_(True)
    loss = _total_loss(params, inputs, targets)
    loss.backward()
    analytic = {n: params.tensors[n].grad.clone() for n in names}
    for n in names:
        params.tensors[n].requires_grad_(False)
        params.tensors[n].grad = None

    max_rel = 0.0
    with torch.no_grad():
        for n in names:
            t = params.tensors[n]
            flat = t.view(-1)
            grad = analytic[n].view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + epsilon
                plus = float(_total_loss(params, inputs, targets))
                flat[i] = orig - epsilon
                minus = float(_total_loss(params, inputs, targets))
                flat[i] = orig
                numeric = (plus - minus) / (2.0 * epsilon)
                a = float(grad[i])
                denom = max(1.0, abs(a), abs(numeric))
                max_rel = max(max_rel, abs(a - numeric) / denom)
    return max_rel


def analytic_gradients(params: LMParameters, seq: TokenSequence) -> dict[str, torch.Tensor]:
    """Backprop gradients of the total loss, by tensor name."""
    work = params.to_dtype(torch.float64)
    ids = work.vocab.encode(seq.tokens)
    inputs = torch.tensor([[work.vocab.eos_id] + ids[:-1]], dtype=torch.int64)
    targets = torch.tensor([ids], dtype=torch.int64)
    for t in work.tensors.values():
        t.requires_grad_(True)
    loss = _total_loss(work, inputs, targets)
    loss.backward()
    return {n: work.tensors[n].grad.detach().clone()
            for n in work.tensor_names()}
