"""Command-line surface: preprocess, train, loocv, interrogate, lexfreq,
gradcheck.

Every delimited output gets a sibling ``<name>.meta.json`` carrying the
effective configuration and seed (CSV bodies stay RFC-4180 clean); JSON
outputs embed the configuration directly. Report paths also render
matplotlib figures next to the delimited output.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import figures
from .chat import EOS_TOKEN, PreprocessConfig, RawTranscript, preprocess
from .checkpoint import (CheckpointError, load_checkpoint_file,
                         save_checkpoint_file)
from .corpus import (CorpusError, build_vocab, load_chat_dir, read_jsonl,
                     write_jsonl)
from .embeddings import EmbeddingError, load_embeddings
from .gradcheck import gradient_check
from .interrogate import (ALL_BANDS, BAND_LABELS, InterrogationError,
                          average_curves, generate_variants, interrogate,
                          load_substitution_csv)
from .lexstats import (FrequencyLexicon, LexStatsError, WordlistTagger,
                       mean_log_lexical_frequency, ols_fit, read_pos_jsonl,
                       regression_dataset, spearman)
from .loocv import (EvaluationError, RunConfig, run_loocv, screening_subset,
                    severity_perplexity_summary)
from .metrics import MetricsError
from .model import LMConfig, ModelError, init_params
from .training import TrainingError, train


class CliError(Exception):
    pass


_LM_FIELDS = ("embedding_dim", "layer_dims", "tie_embeddings", "weight_drop",
              "batch_size", "bptt_window", "epochs", "learning_rate",
              "grad_clip", "seed", "averaging_start", "precision")


def _add_lm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; explicit "
                   "flags override its values")
    p.add_argument("--embedding-dim", type=int)
    p.add_argument("--layer-dims", type=str,
                   help="comma-separated, e.g. 800,200")
    p.add_argument("--tie-embeddings", type=int, choices=(0, 1))
    p.add_argument("--weight-drop", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--bptt-window", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--averaging-start", type=int)
    p.add_argument("--precision", choices=("float32", "float64"))


def _build_lm_config(args, pretrained: bool = False) -> LMConfig:
    values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        values.update({k: v for k, v in file_cfg.get("lm", file_cfg).items()
                       if k in _LM_FIELDS})
    for flag in _LM_FIELDS:
        v = getattr(args, flag, None)
        if v is not None:
            values[flag] = v
    if isinstance(values.get("layer_dims"), str):
        values["layer_dims"] = tuple(
            int(d) for d in values["layer_dims"].split(",") if d)
    if "tie_embeddings" in values:
        values["tie_embeddings"] = bool(values["tie_embeddings"])
    if pretrained and "learning_rate" not in values:
        values["learning_rate"] = 5.0  # lower start preserves injected vectors
    try:
        return LMConfig(**values)
    except (TypeError, ModelError) as exc:
        raise CliError(f"bad model configuration: {exc}") from exc


def _jobs(args) -> int | None:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("PPLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"PPLAB_JOBS={env!r} is not an integer")
    return os.cpu_count()


def _write_meta(csv_path: Path, config: dict, seed=None) -> None:
    meta = {"config": config, "seed": seed,
            "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    csv_path.with_suffix(csv_path.suffix + ".meta.json").write_text(
        json.dumps(meta, indent=2))


def _load_narrative(path: Path, config: PreprocessConfig):
    lines = [l.strip() for l in path.read_text(encoding="utf-8").splitlines()
             if l.strip()]
    raw = RawTranscript(participant_id=path.stem, visit_index=0,
                        utterances=tuple(lines))
    return preprocess(raw, config)


def _load_variants(narratives_dir: Path, config: PreprocessConfig):
    variants = []
    for band in ALL_BANDS:
        f = narratives_dir / f"{band.label}.txt"
        if not f.exists():
            raise CliError(f"missing narrative file {f} (one file per band "
                           f"label: {', '.join(BAND_LABELS)})")
        variants.append((band, _load_narrative(f, config)))
    return variants


# --------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = PreprocessConfig(append_eos=not args.no_eos)
    corpus, errors = load_chat_dir(args.chat_dir, metadata_csv=args.metadata,
                                   config=cfg, strict=args.strict)
    write_jsonl(corpus, args.out)
    for e in errors:
        print(f"warning: {e}", file=sys.stderr)
    n_dem = len(corpus.by_group("dementia"))
    n_con = len(corpus.by_group("control"))
    n_tr = len(corpus.all_sequences())
    print(f"wrote {args.out}: {len(corpus)} participants "
          f"({n_dem} dementia, {n_con} control), {n_tr} transcripts")
    meta = {"chat_dir": str(args.chat_dir),
            "metadata_csv": str(args.metadata) if args.metadata else None,
            "append_eos": not args.no_eos, "skipped": errors}
    _write_meta(Path(args.out), meta)
    if errors and args.strict:
        return 1
    return 0


def cmd_train(args) -> int:
    corpus = read_jsonl(args.corpus)
    seqs = corpus.group_sequences(args.group)
    if not seqs:
        raise CliError(f"corpus has no {args.group} transcripts")
    pretrained = load_embeddings(args.pretrained) if args.pretrained else None
    cfg = _build_lm_config(args, pretrained=pretrained is not None)
    vocab = build_vocab(seqs, min_count=args.min_count)
    init = init_params(cfg, vocab, seed=cfg.seed, pretrained=pretrained)
    params, report = train(seqs, cfg, vocab, init)
    save_checkpoint_file(params, args.out)
    report_path = Path(args.out).with_suffix(".train.json")
    report_path.write_text(json.dumps(
        {"config": cfg.to_dict(), "group": args.group,
         "vocab_size": len(vocab), "report": report.to_dict()}, indent=2))
    print(f"wrote {args.out} (final loss {report.final_loss:.4f}, "
          f"report {report_path})")
    return 0


def cmd_loocv(args) -> int:
    corpus = read_jsonl(args.corpus)
    pretrained = load_embeddings(args.pretrained) if args.pretrained else None
    cfg = _build_lm_config(args, pretrained=pretrained is not None)
    seeds = (tuple(int(s) for s in args.seeds.split(",")) if args.seeds
             else tuple(cfg.seed + i for i in range(args.repetitions)))
    run_config = RunConfig(lm_config=cfg, alpha=args.alpha,
                           pretrained=pretrained,
                           repetitions=args.repetitions, seeds=seeds,
                           min_count=args.min_count)
    report = run_loocv(corpus, run_config, jobs=_jobs(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_json(out_dir / "report.json")
    scores_csv = out_dir / "scores.csv"
    report.write_scores_csv(scores_csv)
    _write_meta(scores_csv, report.config, seed=list(seeds))
    figures.plot_score_separation(report.all_scores(),
                                  out_dir / "score_separation.png")
    extras = {}
    if args.screening_mmse is not None:
        screening = screening_subset(corpus, report, args.screening_mmse)
        screening.write_json(out_dir / "screening.json")
        extras["screening"] = screening.aggregate
    if args.severity_mmse is not None:
        summary = severity_perplexity_summary(corpus, report,
                                              args.severity_mmse)
        (out_dir / "severity.json").write_text(json.dumps(
            {"config": report.config, "summary": summary}, indent=2))
        extras["severity"] = summary
    for name, stats in report.aggregate.items():
        hw = stats["ci95_half_width"]
        ci = f" +/- {hw:.4f}" if hw is not None else ""
        print(f"{name}: {stats['mean']:.4f}{ci}")
    return 0


def cmd_interrogate(args) -> int:
    prep = PreprocessConfig()
    if args.narratives_dir:
        variants = _load_variants(Path(args.narratives_dir), prep)
    elif args.substitutions:
        if not args.baseline_narrative:
            raise CliError("--substitutions requires --baseline-narrative")
        table = load_substitution_csv(args.substitutions)
        base = _load_narrative(Path(args.baseline_narrative), prep)
        variants = generate_variants(base, table)
    else:
        raise CliError("provide --narratives-dir or --substitutions")
    alphas = [float(a) for a in args.alphas.split(",")]

    curves = []
    if args.con and args.dem:
        pairs = [(load_checkpoint_file(args.con),
                  load_checkpoint_file(args.dem))]
    elif args.corpus:
        corpus = read_jsonl(args.corpus)
        pretrained = (load_embeddings(args.pretrained)
                      if args.pretrained else None)
        cfg = _build_lm_config(args, pretrained=pretrained is not None)
        con_seqs = corpus.group_sequences("control")
        dem_seqs = corpus.group_sequences("dementia")
        vocab = build_vocab(con_seqs + dem_seqs, min_count=args.min_count)
        con, _ = train(con_seqs, cfg, vocab,
                       init_params(cfg, vocab, cfg.seed, pretrained))
        dem_cfg = replace(cfg, seed=cfg.seed + 1)
        dem, _ = train(dem_seqs, dem_cfg, vocab,
                       init_params(dem_cfg, vocab, cfg.seed + 1, pretrained))
        pairs = [(con, dem)]
    else:
        raise CliError("provide --con/--dem checkpoints or --corpus")

    for con, dem in pairs:
        curves.append(interrogate(con, dem, alphas, variants))
    curve = average_curves(curves)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_csv = out_dir / "perturbation_curve.csv"
    curve.write_csv(curve_csv)
    _write_meta(curve_csv, {"alphas": alphas, "bands": list(BAND_LABELS),
                            "fold_pairs": len(pairs)})
    figures.plot_perturbation_curves(curve,
                                     out_dir / "perturbation_curve.png")
    print(f"wrote {curve_csv} ({len(curve.points)} points)")
    return 0


def cmd_lexfreq(args) -> int:
    lex = FrequencyLexicon.from_tsv(args.lexicon)
    if args.nouns and args.verbs:
        tagger = WordlistTagger.from_files(args.nouns, args.verbs)
    else:
        tagger = WordlistTagger.bundled()
    pos_sidecar = read_pos_jsonl(args.pos) if args.pos else {}
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"lexicon": str(args.lexicon)}

    if args.narratives_dir:
        prep = PreprocessConfig(append_eos=False)
        variants = _load_variants(Path(args.narratives_dir), prep)
        labels, means = [], []
        for band, seq in variants:
            m = mean_log_lexical_frequency(seq.tokens, tagger.tag(seq.tokens),
                                           lex)
            labels.append(band.label)
            means.append(m)
        defined = [(i, m) for i, m in enumerate(means) if m is not None]
        rho = (spearman([i for i, _ in defined], [m for _, m in defined])
               if len(defined) >= 2 else None)
        report["narratives"] = [
            {"band": l, "mean_log_frequency": m}
            for l, m in zip(labels, means)]
        report["spearman_band_vs_frequency"] = rho
        csv_path = out_dir / "narrative_frequencies.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["band", "mean_log_frequency"])
            for l, m in zip(labels, means):
                w.writerow([l, "" if m is None else f"{m:.6f}"])
        _write_meta(csv_path, report)
        figures.plot_narrative_frequencies(
            [l for i, l in enumerate(labels) if means[i] is not None],
            [m for m in means if m is not None],
            out_dir / "narrative_frequencies.png")
    elif args.corpus:
        corpus = read_jsonl(args.corpus)
        rows = []
        for p in corpus.participants:
            for seq in p.transcripts:
                tokens = [t for t in seq.tokens if t != EOS_TOKEN]
                tags = pos_sidecar.get((p.participant_id, seq.visit_index))
                if tags is None:
                    tags = tagger.tag(tokens)
                m = mean_log_lexical_frequency(tokens, tags, lex)
                rows.append((p.participant_id, seq.visit_index, p.group, m))
        csv_path = out_dir / "transcript_frequencies.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["participant_id", "visit", "group",
                        "mean_log_frequency"])
            for pid, visit, group, m in rows:
                w.writerow([pid, visit, group,
                            "" if m is None else f"{m:.6f}"])
        _write_meta(csv_path, report)
        if args.scores:
            scores = {}
            with open(args.scores, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    key = (row["participant_id"], int(row["visit"]))
                    scores[key] = (float(row["p_con"]), float(row["p_model"]))
            X, y, names, excluded = regression_dataset(corpus, scores, lex,
                                                       tagger)
            result = ols_fit(X, y, names=names, excluded=excluded)
            report["regression"] = result.to_dict()
    else:
        raise CliError("provide --narratives-dir or --corpus")

    (out_dir / "lexfreq.json").write_text(json.dumps(report, indent=2))
    print(f"wrote {out_dir / 'lexfreq.json'}")
    return 0


def cmd_gradcheck(args) -> int:
    from .chat import TokenSequence
    from .corpus import Vocabulary
    from .chat import UNK_TOKEN
    words = [f"w{i}" for i in range(args.vocab_size - 2)]
    vocab = Vocabulary([UNK_TOKEN, EOS_TOKEN] + words)
    dims = tuple(int(d) for d in args.dims.split(","))
    cfg = LMConfig(embedding_dim=dims[-1], layer_dims=dims,
                   tie_embeddings=True, weight_drop=0.0, batch_size=1,
                   bptt_window=args.window, epochs=1, learning_rate=1.0,
                   precision="float64")
    seq = TokenSequence(tokens=tuple(
        words[i % len(words)] for i in range(args.window)))
    err = gradient_check(cfg, vocab, seq, epsilon=args.epsilon,
                         seed=args.seed or 0)
    ok = err < args.threshold
    print(f"max relative error: {err:.3e} "
          f"({'PASS' if ok else 'FAIL'} at {args.threshold:g})")
    return 0 if ok else 1


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pplab",
        description="Paired-perplexity transcript analysis: twin LSTM "
                    "language models, interpolation, and lexical-frequency "
                    "interrogation.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("preprocess", help="parse a directory of .cha files "
                        "into a canonical JSON-lines corpus")
    sp.add_argument("chat_dir", type=Path)
    sp.add_argument("--metadata", type=Path,
                    help="sidecar CSV: participant_id,group,age,education,"
                         "visit,mmse (wins over @ID headers)")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--no-eos", action="store_true",
                    help="do not append end-of-utterance markers")
    sp.add_argument("--strict", action="store_true",
                    help="fail on the first unparsable file")
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("train", help="train one language model on one group")
    sp.add_argument("--corpus", type=Path, required=True)
    sp.add_argument("--group", choices=("dementia", "control"), required=True)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--pretrained", type=Path,
                    help="pre-trained embedding text file")
    sp.add_argument("--min-count", type=int, default=1)
    _add_lm_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("loocv", help="participant-level leave-one-out "
                        "evaluation of the paired-perplexity method")
    sp.add_argument("--corpus", type=Path, required=True)
    sp.add_argument("--out-dir", type=Path, required=True)
    sp.add_argument("--alpha", type=float,
                    help="replace the dementia model by the interpolated "
                         "alpha model")
    sp.add_argument("--pretrained", type=Path)
    sp.add_argument("--repetitions", type=int, default=1)
    sp.add_argument("--seeds", type=str,
                    help="comma-separated, one per repetition")
    sp.add_argument("--min-count", type=int, default=1)
    sp.add_argument("--screening-mmse", type=int,
                    help="also report metrics restricted to last MMSE >= N")
    sp.add_argument("--severity-mmse", type=int,
                    help="also report dementia-model perplexity for "
                         "transcripts with MMSE <= N")
    sp.add_argument("--jobs", type=int,
                    help="parallel fold workers (or PPLAB_JOBS)")
    _add_lm_flags(sp)
    sp.set_defaults(func=cmd_loocv)

    sp = sub.add_parser("interrogate", help="perplexity curves of "
                        "interpolated models over frequency-band narratives")
    sp.add_argument("--con", type=Path, help="control model checkpoint")
    sp.add_argument("--dem", type=Path, help="dementia model checkpoint")
    sp.add_argument("--corpus", type=Path,
                    help="train one twin pair from this corpus instead")
    sp.add_argument("--pretrained", type=Path)
    sp.add_argument("--min-count", type=int, default=1)
    sp.add_argument("--alphas", type=str, default="0,0.25,0.5,0.75,1.0")
    sp.add_argument("--narratives-dir", type=Path,
                    help="directory of <band-label>.txt narrative files")
    sp.add_argument("--substitutions", type=Path,
                    help="CSV word,band_low,band_high,replacement")
    sp.add_argument("--baseline-narrative", type=Path)
    sp.add_argument("--out-dir", type=Path, required=True)
    _add_lm_flags(sp)
    sp.set_defaults(func=cmd_interrogate)

    sp = sub.add_parser("lexfreq", help="mean log lexical frequency, band "
                        "validation, and the perplexity regression")
    sp.add_argument("--lexicon", type=Path, required=True,
                    help="TSV word<TAB>freq_per_million")
    sp.add_argument("--narratives-dir", type=Path)
    sp.add_argument("--corpus", type=Path)
    sp.add_argument("--pos", type=Path,
                    help="JSON-lines POS sidecar {participant_id,visit,tags}")
    sp.add_argument("--nouns", type=Path, help="noun wordlist (fallback "
                    "tagger); default: bundled list")
    sp.add_argument("--verbs", type=Path)
    sp.add_argument("--scores", type=Path,
                    help="scores.csv from loocv; adds the regression block")
    sp.add_argument("--out-dir", type=Path, required=True)
    sp.set_defaults(func=cmd_lexfreq)

    sp = sub.add_parser("gradcheck", help="finite-difference verification "
                        "of the LSTM gradients")
    sp.add_argument("--vocab-size", type=int, default=20)
    sp.add_argument("--dims", type=str, default="12")
    sp.add_argument("--window", type=int, default=5)
    sp.add_argument("--epsilon", type=float, default=1e-5)
    sp.add_argument("--threshold", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gradcheck)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CorpusError, ModelError, TrainingError,
            EvaluationError, InterrogationError, LexStatsError,
            CheckpointError, EmbeddingError, MetricsError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
