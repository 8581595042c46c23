"""Pre-trained word embedding loader with subword n-gram fallback.

Text format: one entry per line, token then D space-separated numbers.
Subword (character n-gram) entries carry the sigil prefix; queries for
out-of-vocabulary words average the vectors of their 3..6-grams found in
the table.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

SUBWORD_SIGIL = "@"
NGRAM_MIN = 3
NGRAM_MAX = 6


class EmbeddingError(ValueError):
    pass


class EmbeddingTable:
    def __init__(self, dim: int, words: dict[str, np.ndarray],
                 subwords: dict[str, np.ndarray] | None = None):
        self.dim = dim
        self.words = words
        self.subwords = subwords or {}

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    def ngrams(self, word: str) -> list[str]:
        out = []
        for n in range(NGRAM_MIN, NGRAM_MAX + 1):
            out.extend(word[i:i + n] for i in range(len(word) - n + 1))
        return out

    def lookup(self, word: str) -> np.ndarray | None:
        """Exact vector, else the mean over known n-grams, else None."""
        vec = self.words.get(word)
        if vec is not None:
            return vec
        if not self.subwords:
            return None
        hits = [self.subwords[g] for g in self.ngrams(word) if g in self.subwords]
        if not hits:
            return None
        return np.mean(hits, axis=0)


def load_embeddings(path: str | Path, sigil: str = SUBWORD_SIGIL) -> EmbeddingTable:
    words: dict[str, np.ndarray] = {}
    subwords: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            # a leading "count dim" header line is tolerated
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue
                except ValueError:
                    pass
            token, values = parts[0], parts[1:]
            try:
                vec = np.asarray([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"line {lineno}: bad number: {exc}") from exc
            if dim is None:
                dim = len(vec)
                if dim == 0:
                    raise EmbeddingError(f"line {lineno}: entry has no values")
            elif len(vec) != dim:
                raise EmbeddingError(
                    f"line {lineno}: dimension {len(vec)} != {dim}")
            if token.startswith(sigil):
                subwords[token[len(sigil):]] = vec
            else:
                words[token] = vec
    if dim is None:
        raise EmbeddingError(f"no entries in {path}")
    return EmbeddingTable(dim=dim, words=words, subwords=subwords)
