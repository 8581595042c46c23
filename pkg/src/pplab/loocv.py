"""Participant-level leave-one-out evaluation of twin (and interpolated)
language models."""
from __future__ import annotations

import csv
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .corpus import Corpus, build_vocab, split_loocv
from .interrogate import interpolate
from .metrics import MetricsError, acc_eer, auc, confidence_interval
from .model import LMConfig, init_params
from .training import perplexity, train


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class PairedScore:
    participant_id: str
    visit: int
    label: str  # "dementia" | "control"
    p_con: float
    p_model: float

    @property
    def diff(self) -> float:
        return self.p_con - self.p_model

    @property
    def is_case(self) -> bool:
        return self.label == "dementia"


@dataclass(frozen=True)
class RunConfig:
    lm_config: LMConfig
    alpha: float | None = None
    pretrained: object | None = None  # EmbeddingTable
    repetitions: int = 1
    seeds: tuple[int, ...] = (0,)
    min_count: int = 1

    def __post_init__(self):
        if len(self.seeds) != self.repetitions:
            raise EvaluationError(
                f"{self.repetitions} repetitions need {self.repetitions} seeds, "
                f"got {len(self.seeds)}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise EvaluationError("alpha must be in [0, 1]")


METRIC_NAMES = ("auc_diff", "auc_p_con", "auc_p_model", "acc_eer_diff")


@dataclass(frozen=True)
class RepetitionResult:
    seed: int
    scores: tuple[PairedScore, ...]
    metrics: dict


@dataclass(frozen=True)
class EvaluationReport:
    repetitions: tuple[RepetitionResult, ...]
    aggregate: dict  # metric -> {"mean": .., "ci95_half_width": .. or None}
    config: dict

    def all_scores(self) -> list[PairedScore]:
        return [s for rep in self.repetitions for s in rep.scores]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "ci_method": "normal approximation over repetition means",
            "aggregate": self.aggregate,
            "repetitions": [
                {"seed": rep.seed, "metrics": rep.metrics,
                 "scores": [
                     {"participant_id": s.participant_id, "visit": s.visit,
                      "label": s.label, "p_con": s.p_con,
                      "p_model": s.p_model, "diff": s.diff}
                     for s in rep.scores]}
                for rep in self.repetitions],
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_scores_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["repetition_seed", "participant_id", "visit", "label",
                        "p_con", "p_model", "diff"])
            for rep in self.repetitions:
                for s in rep.scores:
                    w.writerow([rep.seed, s.participant_id, s.visit, s.label,
                                f"{s.p_con:.6f}", f"{s.p_model:.6f}",
                                f"{s.diff:.6f}"])


def fold_seed(run_seed: int, participant_id: str) -> int:
    """Per-fold seed derived from the run seed and a stable id hash, so
    results do not depend on fold execution order."""
    return (run_seed * 1_000_003 + zlib.crc32(participant_id.encode())) % (2 ** 31)


def run_fold(corpus: Corpus, held_out: str, run_config: RunConfig,
             run_seed: int) -> list[PairedScore]:
    """Train twin models without the held-out participant, then score all
    of that participant's transcripts with both."""
    train_corpus, test_seqs = split_loocv(corpus, held_out)
    con_seqs = train_corpus.group_sequences("control")
    dem_seqs = train_corpus.group_sequences("dementia")
    if not con_seqs or not dem_seqs:
        raise EvaluationError(
            f"fold {held_out}: a training group is empty")
    vocab = build_vocab(con_seqs + dem_seqs, min_count=run_config.min_count)
    seed = fold_seed(run_seed, held_out)
    cfg = replace(run_config.lm_config, seed=seed)
    con_init = init_params(cfg, vocab, seed=seed,
                           pretrained=run_config.pretrained)
    dem_init = init_params(cfg, vocab, seed=seed + 1,
                           pretrained=run_config.pretrained)
    con_model, _ = train(con_seqs, cfg, vocab, con_init)
    dem_model, _ = train(dem_seqs, replace(cfg, seed=seed + 1), vocab, dem_init)
    if run_config.alpha is not None:
        dem_model = interpolate(dem_model, con_model, run_config.alpha)

    held = corpus.get(held_out)
    scores = []
    for seq in test_seqs:
        scores.append(PairedScore(
            participant_id=held_out,
            visit=seq.visit_index,
            label=held.group,
            p_con=perplexity(con_model, seq),
            p_model=perplexity(dem_model, seq),
        ))
    return scores


def compute_metrics(scores: list[PairedScore]) -> dict:
    """Per-repetition metrics. Polarity: higher p_con - p_model means more
    dementia-like; individual models are scored with the polarity that
    favors each (higher p_con, lower p_model for cases)."""
    return {
        "auc_diff": auc([(s.diff, s.is_case) for s in scores]),
        "auc_p_con": auc([(s.p_con, s.is_case) for s in scores]),
        "auc_p_model": auc([(-s.p_model, s.is_case) for s in scores]),
        "acc_eer_diff": acc_eer([(s.diff, s.is_case) for s in scores])[0],
    }


def aggregate_metrics(per_rep: list[dict]) -> dict:
    out = {}
    for name in METRIC_NAMES:
        vals = [m[name] for m in per_rep]
        if len(vals) >= 2:
            mean, hw = confidence_interval(vals)
        else:
            mean, hw = vals[0], None
        out[name] = {"mean": mean, "ci95_half_width": hw}
    return out


def run_loocv(corpus: Corpus, run_config: RunConfig,
              jobs: int | None = None, progress=None) -> EvaluationReport:
    """One fold per participant, repeated per seed. Fold workers are
    independent; results are ordered by participant id regardless of
    parallelism."""
    for group in ("dementia", "control"):
        if len(corpus.by_group(group)) < 2:
            raise EvaluationError(f"need at least 2 {group} participants")
    pids = [p.participant_id for p in corpus.participants]
    reps = []
    for seed in run_config.seeds:
        def one(pid, _seed=seed):
            return pid, run_fold(corpus, pid, run_config, _seed)
        if jobs and jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = dict(pool.map(one, pids))
        else:
            results = dict(one(pid) for pid in pids)
        scores = [s for pid in pids for s in results[pid]]
        if progress:
            progress(seed, scores)
        reps.append(RepetitionResult(seed=seed, scores=tuple(scores),
                                     metrics=compute_metrics(scores)))
    aggregate = aggregate_metrics([r.metrics for r in reps])
    return EvaluationReport(
        repetitions=tuple(reps),
        aggregate=aggregate,
        config={"lm_config": run_config.lm_config.to_dict(),
                "alpha": run_config.alpha,
                "pretrained": run_config.pretrained is not None,
                "repetitions": run_config.repetitions,
                "seeds": list(run_config.seeds),
                "min_count": run_config.min_count},
    )


def screening_subset(corpus: Corpus, report: EvaluationReport,
                     mmse_floor: int = 21) -> EvaluationReport:
    """Metrics restricted to participants whose last recorded MMSE is at
    least mmse_floor; participants without MMSE are excluded and counted."""
    keep, lacking = set(), 0
    for p in corpus.participants:
        last = p.last_mmse()
        if last is None:
            lacking += 1
        elif last >= mmse_floor:
            keep.add(p.participant_id)
    reps = []
    for rep in report.repetitions:
        sub = tuple(s for s in rep.scores if s.participant_id in keep)
        if not sub:
            raise EvaluationError("screening subset is empty")
        try:
            metrics = compute_metrics(list(sub))
        except MetricsError as exc:
            raise EvaluationError(f"screening subset: {exc}") from exc
        reps.append(RepetitionResult(seed=rep.seed, scores=sub, metrics=metrics))
    aggregate = aggregate_metrics([r.metrics for r in reps])
    config = dict(report.config)
    config["screening_mmse_floor"] = mmse_floor
    config["screening_excluded_no_mmse"] = lacking
    return EvaluationReport(repetitions=tuple(reps), aggregate=aggregate,
                            config=config)


def severity_perplexity_summary(corpus: Corpus, report: EvaluationReport,
                                mmse_ceiling: int = 10) -> dict:
    """Mean (+/- CI over repetitions) of model perplexity on held-out
    dementia transcripts, overall and on the severe (MMSE <= ceiling)
    subset."""
    def transcript_mmse(s: PairedScore) -> int | None:
        return corpus.get(s.participant_id).mmse_at(s.visit)

    def summarize(rep_means: list[float], n: int) -> dict | None:
        if not rep_means:
            return None
        if len(rep_means) >= 2:
            mean, hw = confidence_interval(rep_means)
        else:
            mean, hw = rep_means[0], None
        return {"mean_p_model": mean, "ci95_half_width": hw, "n_transcripts": n}

    overall_means, severe_means = [], []
    n_overall = n_severe = 0
    for rep in report.repetitions:
        dem = [s for s in rep.scores if s.is_case]
        if dem:
            overall_means.append(sum(s.p_model for s in dem) / len(dem))
            n_overall = len(dem)
        severe = [s for s in dem
                  if (m := transcript_mmse(s)) is not None and m <= mmse_ceiling]
        if severe:
            severe_means.append(sum(s.p_model for s in severe) / len(severe))
            n_severe = len(severe)
    return {
        "mmse_ceiling": mmse_ceiling,
        "dementia_overall": summarize(overall_means, n_overall),
        "dementia_severe": summarize(severe_means, n_severe),
    }
