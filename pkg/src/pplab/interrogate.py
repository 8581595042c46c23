"""Model interrogation: parameter interpolation and frequency-band
perturbation of narratives."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .chat import TokenSequence
from .model import LMParameters
from .training import perplexity

BAND_LABELS = ("baseline", "0.5-1.0", "1.0-1.5", "1.5-2.0", "2.0-2.5", "2.5-3.0")


class InterrogationError(ValueError):
    pass


def interpolate(dem: LMParameters, con: LMParameters, alpha: float) -> LMParameters:
    """Entrywise alpha*dem + (1-alpha)*con over every trainable tensor."""
    if not 0.0 <= alpha <= 1.0:
        raise InterrogationError(f"alpha {alpha} outside [0, 1]")
    structural = ("embedding_dim", "layer_dims", "tie_embeddings", "precision")
    for f in structural:
        if getattr(dem.config, f) != getattr(con.config, f):
            raise InterrogationError(
                f"config mismatch between the two models: {f} "
                f"{getattr(dem.config, f)!r} != {getattr(con.config, f)!r}")
    if dem.vocab != con.vocab:
        raise InterrogationError("vocabulary mismatch between the two models")
    tensors = {}
    for name in dem.tensor_names():
        a, b = dem.tensors[name], con.tensors[name]
        if a.shape != b.shape:
            raise InterrogationError(f"shape mismatch in tensor {name!r}")
        tensors[name] = alpha * a.detach() + (1.0 - alpha) * b.detach()
    return LMParameters(dem.config, dem.vocab, tensors)


@dataclass(frozen=True)
class FrequencyBand:
    """Half-open log10-frequency interval; ordered by severity with the
    unperturbed baseline first."""
    label: str

    def __post_init__(self):
        if self.label not in BAND_LABELS:
            raise InterrogationError(f"unknown band label {self.label!r}")

    @property
    def severity(self) -> int:
        return BAND_LABELS.index(self.label)

    @property
    def is_baseline(self) -> bool:
        return self.label == "baseline"


ALL_BANDS = tuple(FrequencyBand(l) for l in BAND_LABELS)
DELETE = None  # deletion marker in substitution entries


@dataclass(frozen=True)
class SubstitutionTable:
    """word -> [(band, replacement-or-None)]; replacements become legal
    preprocessed tokens (lowercase, multi-word allowed)."""
    entries: dict

    def replacement_at(self, word: str, band: FrequencyBand):
        """Most severe applicable substitution, or the word itself."""
        best = None
        for b, repl in self.entries.get(word, ()):
            if b.severity <= band.severity and (
                    best is None or b.severity > best[0].severity):
                best = (b, repl)
        if best is None:
            return (word,)
        if best[1] is DELETE:
            return ()
        return tuple(best[1].split())


def load_substitution_csv(path: str | Path) -> SubstitutionTable:
    """CSV columns: word,band_low,band_high,replacement (empty = deletion)."""
    entries: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            word = row["word"].strip().lower()
            label = f"{float(row['band_low']):.1f}-{float(row['band_high']):.1f}"
            band = FrequencyBand(label)
            repl = row.get("replacement", "").strip().lower() or DELETE
            entries.setdefault(word, []).append((band, repl))
    return SubstitutionTable(entries={w: tuple(v) for w, v in entries.items()})


def generate_variants(base: TokenSequence, table: SubstitutionTable
                      ) -> list[tuple[FrequencyBand, TokenSequence]]:
    """One variant per band, cumulative: each applies every substitution
    whose band severity <= the variant's."""
    variants = []
    for band in ALL_BANDS:
        if band.is_baseline:
            variants.append((band, base))
            continue
        tokens: list[str] = []
        for tok in base.tokens:
            tokens.extend(table.replacement_at(tok, band))
        variants.append((band, TokenSequence(tokens=tuple(tokens),
                                             source=base.source)))
    return variants


@dataclass
class PerturbationCurve:
    """Mean (Px - Po) per (alpha, band label), with sample counts."""
    points: dict  # (alpha, label) -> [mean, n]

    def mean(self, alpha: float, label: str) -> float:
        return self.points[(alpha, label)][0]

    def rows(self) -> list[tuple[float, str, float, int]]:
        out = []
        for (alpha, label), (m, n) in sorted(
                self.points.items(),
                key=lambda kv: (kv[0][0], BAND_LABELS.index(kv[0][1]))):
            out.append((alpha, label, m, n))
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "band", "mean_px_minus_po", "n"])
            for alpha, label, m, n in self.rows():
                w.writerow([alpha, label, f"{m:.6f}", n])


def interrogate(con: LMParameters, dem: LMParameters, alphas: list[float],
                variants: list[tuple[FrequencyBand, TokenSequence]]
                ) -> PerturbationCurve:
    """Perplexity elevation of band variants over the baseline narrative,
    for each interpolated model."""
    by_label = {band.label: seq for band, seq in variants}
    if "baseline" not in by_label:
        raise InterrogationError("variants must include the baseline band")
    points = {}
    for alpha in alphas:
        model = interpolate(dem, con, alpha)
        po = perplexity(model, by_label["baseline"])
        for band, seq in variants:
            px = po if band.is_baseline else perplexity(model, seq)
            points[(alpha, band.label)] = [px - po, 1]
    return PerturbationCurve(points=points)


def average_curves(curves: list[PerturbationCurve]) -> PerturbationCurve:
    """Pool per-fold curves into mean-over-folds points."""
    if not curves:
        raise InterrogationError("no curves to average")
    acc: dict = {}
    for curve in curves:
        for key, (m, n) in curve.points.items():
            if key not in acc:
                acc[key] = [0.0, 0]
            acc[key][0] += m * n
            acc[key][1] += n
    return PerturbationCurve(points={
        k: [s / n, n] for k, (s, n) in acc.items()})
