"""Lexical-frequency measures, rank correlation, and OLS with t-statistics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .chat import EOS_TOKEN


class LexStatsError(ValueError):
    pass


class FrequencyLexicon:
    """word -> frequency per million (case-insensitive); log10 on demand."""

    def __init__(self, freqs: dict[str, float]):
        self.freqs = {}
        for w, f in freqs.items():
            if f <= 0:
                raise LexStatsError(f"non-positive frequency for {w!r}")
            self.freqs[w.lower()] = f

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.freqs

    def log10_frequency(self, word: str) -> float | None:
        f = self.freqs.get(word.lower())
        return None if f is None else math.log10(f)

    @classmethod
    def from_tsv(cls, path: str | Path) -> "FrequencyLexicon":
        """TSV `word<TAB>freq_per_million`; a non-numeric first row is
        treated as a header."""
        freqs: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) < 2:
                    raise LexStatsError(f"line {lineno}: expected word<TAB>freq")
                try:
                    freqs[parts[0].strip().lower()] = float(parts[1])
                except ValueError:
                    if lineno == 1:
                        continue  # header
                    raise LexStatsError(f"line {lineno}: bad frequency {parts[1]!r}")
        if not freqs:
            raise LexStatsError(f"no entries in {path}")
        return cls(freqs)


POS_TAGS = ("noun", "verb", "other")


class WordlistTagger:
    """Coarse noun/verb tagging from plain wordlists (one word per line)."""

    def __init__(self, nouns: set[str], verbs: set[str]):
        self.nouns = {w.lower() for w in nouns}
        self.verbs = {w.lower() for w in verbs}

    @classmethod
    def from_files(cls, noun_path: str | Path, verb_path: str | Path) -> "WordlistTagger":
        def read(p):
            return {w.strip().lower() for w in Path(p).read_text().splitlines()
                    if w.strip()}
        return cls(read(noun_path), read(verb_path))

    @classmethod
    def bundled(cls) -> "WordlistTagger":
        data = resources.files("pplab") / "data"
        return cls.from_files(data / "nouns.txt", data / "verbs.txt")

    def tag(self, tokens) -> list[str]:
        out = []
        for t in tokens:
            tl = t.lower()
            if tl in self.nouns:
                out.append("noun")
            elif tl in self.verbs:
                out.append("verb")
            else:
                out.append("other")
        return out


def mean_log_lexical_frequency(tokens, pos: list[str],
                               lex: FrequencyLexicon) -> float | None:
    """Mean log10 frequency over the set of distinct noun/verb word forms
    present in the lexicon; None when no word qualifies. No stemming."""
    if len(pos) != len(tokens):
        raise LexStatsError(
            f"pos annotation length {len(pos)} != token count {len(tokens)}")
    eligible = {t.lower() for t, p in zip(tokens, pos) if p in ("noun", "verb")}
    vals = [lex.log10_frequency(w) for w in eligible]
    vals = [v for v in vals if v is not None]
    if not vals:
        return None
    return sum(vals) / len(vals)


def _average_ranks(xs) -> np.ndarray:
    x = np.asarray(xs, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float | None:
    """Rank correlation with average ranks for ties; None when either side
    has zero rank variance."""
    if len(xs) != len(ys):
        raise LexStatsError("length mismatch")
    if len(xs) < 2:
        raise LexStatsError("need at least 2 observations")
    rx, ry = _average_ranks(xs), _average_ranks(ys)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


# --- regularized incomplete beta (continued fraction) and t p-values -------

def _betacf(a: float, b: float, x: float) -> float:
    # Lentz's continued fraction for the incomplete beta
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided p-value of Student's t via I_x(df/2, 1/2)."""
    if df < 1:
        raise LexStatsError("degrees of freedom must be >= 1")
    x = df / (df + t * t)
    return reg_inc_beta(df / 2.0, 0.5, x)


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_statistics: tuple[float, ...]
    p_values: tuple[float, ...]
    r_squared: float
    n: int
    excluded: int = 0

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.names.index(name)]

    def p_value(self, name: str) -> float:
        return self.p_values[self.names.index(name)]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "excluded_rows": self.excluded,
            "r_squared": self.r_squared,
            "predictors": [
                {"name": nm, "coefficient": c, "std_error": se,
                 "t_statistic": t, "p_value": p}
                for nm, c, se, t, p in zip(
                    self.names, self.coefficients, self.std_errors,
                    self.t_statistics, self.p_values)
            ],
        }


def ols_fit(X: np.ndarray, y: np.ndarray,
            names: list[str] | None = None, excluded: int = 0) -> RegressionResult:
    """Least squares via QR; unbiased residual variance; t p-values from
    the regularized incomplete beta. X must include the intercept column."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n <= p:
        raise LexStatsError(f"n={n} rows cannot support {p} predictors")
    names = tuple(names) if names else tuple(f"x{i}" for i in range(p))
    rank = np.linalg.matrix_rank(X)
    if rank < p:
        _, r = np.linalg.qr(X)
        bad = [names[i] for i in range(p)
               if abs(r[i, i]) < 1e-10 * max(1.0, abs(r[0, 0]))]
        raise LexStatsError(f"design matrix is rank deficient; "
                            f"collinear columns: {bad or 'undetermined'}")
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - p
    s2 = rss / df
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(s2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = [t_two_sided_p(float(t), df) if np.isfinite(t) else 0.0
             for t in tstats]
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return RegressionResult(
        names=names,
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_statistics=tuple(float(t) for t in tstats),
        p_values=tuple(float(p) for p in pvals),
        r_squared=r2,
        n=n,
        excluded=excluded,
    )


def regression_dataset(corpus, scores, lex: FrequencyLexicon, tagger
                       ) -> tuple[np.ndarray, np.ndarray, list[str], int]:
    """Baseline-visit design matrix linking perplexities to mean log
    lexical frequency.

    scores: per-(participant, visit) paired perplexities, as a mapping
    (participant_id, visit) -> (p_con, p_model). Returns (X, y, names,
    excluded) with columns p_model, p_con, age, education, length,
    intercept; rows with missing covariates are dropped and counted.
    """
    rows, ys = [], []
    excluded = 0
    for part in corpus.participants:
        seq = min(part.transcripts, key=lambda s: s.visit_index)
        key = (part.participant_id, seq.visit_index)
        score = scores.get(key)
        tokens = [t for t in seq.tokens if t != EOS_TOKEN]
        mlf = mean_log_lexical_frequency(tokens, tagger.tag(tokens), lex)
        if (score is None or mlf is None or part.age_at_baseline is None
                or part.education is None):
            excluded += 1
            continue
        p_con, p_model = score
        rows.append([p_model, p_con, part.age_at_baseline, part.education,
                     float(len(tokens)), 1.0])
        ys.append(mlf)
    if not rows:
        raise LexStatsError("regression dataset is empty")
    names = ["p_model", "p_con", "age", "education", "length", "intercept"]
    return np.asarray(rows), np.asarray(ys), names, excluded


def read_pos_jsonl(path: str | Path) -> dict[tuple[str, int], list[str]]:
    """Sidecar POS annotations: JSON-lines {participant_id, visit, tags}."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out[(rec["participant_id"], rec["visit"])] = list(rec["tags"])
    return out
