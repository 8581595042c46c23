"""Participant-grouped corpus, vocabulary, and leave-one-out splitting."""
from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .chat import (EOS_TOKEN, UNK_TOKEN, ChatParseError, PreprocessConfig,
                   RawTranscript, TokenSequence, parse_chat, preprocess)

GROUPS = ("dementia", "control")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class ParticipantRecord:
    participant_id: str
    group: str
    transcripts: tuple[TokenSequence, ...]
    age_at_baseline: float | None = None
    education: float | None = None
    mmse_history: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.group not in GROUPS:
            raise CorpusError(f"unknown group {self.group!r} for {self.participant_id}")
        if not self.transcripts:
            raise CorpusError(f"participant {self.participant_id} has no transcripts")

    def last_mmse(self) -> int | None:
        if not self.mmse_history:
            return None
        return max(self.mmse_history)[1]

    def mmse_at(self, visit: int) -> int | None:
        for v, score in self.mmse_history:
            if v == visit:
                return score
        return None


@dataclass(frozen=True)
class Corpus:
    participants: tuple[ParticipantRecord, ...]

    def __post_init__(self):
        ids = [p.participant_id for p in self.participants]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise CorpusError(f"duplicate participant ids: {dupes}")

    def __len__(self) -> int:
        return len(self.participants)

    def by_group(self, group: str) -> list[ParticipantRecord]:
        return [p for p in self.participants if p.group == group]

    def group_sequences(self, group: str) -> list[TokenSequence]:
        return [t for p in self.by_group(group) for t in p.transcripts]

    def all_sequences(self) -> list[TokenSequence]:
        return [t for p in self.participants for t in p.transcripts]

    def get(self, participant_id: str) -> ParticipantRecord:
        for p in self.participants:
            if p.participant_id == participant_id:
                return p
        raise CorpusError(f"unknown participant {participant_id!r}")


def split_loocv(corpus: Corpus, held_out: str) -> tuple[Corpus, list[TokenSequence]]:
    """Hold out every transcript of one participant; train on the rest."""
    held = corpus.get(held_out)
    remaining = tuple(p for p in corpus.participants if p.participant_id != held_out)
    return Corpus(participants=remaining), list(held.transcripts)


class Vocabulary:
    """Dense token<->id mapping with reserved unknown and end-of-sequence ids."""

    def __init__(self, tokens: list[str] | tuple[str, ...]):
        self.id_to_token: tuple[str, ...] = tuple(tokens)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise CorpusError("vocabulary tokens are not unique")
        try:
            self.unk_id = self.token_to_id[UNK_TOKEN]
            self.eos_id = self.token_to_id[EOS_TOKEN]
        except KeyError as exc:
            raise CorpusError(f"reserved token missing from vocabulary: {exc}")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def encode(self, tokens) -> list[int]:
        unk = self.unk_id
        t2i = self.token_to_id
        return [t2i.get(t, unk) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]


def build_vocab(sequences: list[TokenSequence], min_count: int = 1) -> Vocabulary:
    """Vocabulary of tokens with count >= min_count, plus reserved tokens."""
    if min_count < 1:
        raise CorpusError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for seq in sequences:
        counts.update(t for t in seq.tokens if t not in (UNK_TOKEN, EOS_TOKEN))
    if not sequences or not any(len(s) for s in sequences):
        raise CorpusError("cannot build vocabulary from empty input")
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocabulary([UNK_TOKEN, EOS_TOKEN] + kept)


# ---------------------------------------------------------------------------
# Loading from CHAT directories + sidecar metadata, and JSON-lines I/O.

_FILENAME_RE = re.compile(r"^(?P<pid>.+?)[-_](?P<visit>\d+)$")


def _split_filename(stem: str) -> tuple[str, int]:
    m = _FILENAME_RE.match(stem)
    if m:
        return m.group("pid"), int(m.group("visit"))
    return stem, 0


def read_metadata_csv(path: str | Path) -> dict[str, dict]:
    """Sidecar metadata, keyed by participant_id.

    Columns: participant_id,group,age,education,visit,mmse. One row per
    (participant, visit); demographic fields may repeat across rows.
    """
    out: dict[str, dict] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pid = row["participant_id"].strip()
            rec = out.setdefault(pid, {"mmse": {}})
            if row.get("group"):
                rec["group"] = row["group"].strip().lower()
            for key in ("age", "education"):
                if row.get(key):
                    rec[key] = float(row[key])
            if row.get("mmse") not in (None, ""):
                visit = int(row.get("visit") or 0)
                rec["mmse"][visit] = int(row["mmse"])
    return out


def load_chat_dir(
    chat_dir: str | Path,
    metadata_csv: str | Path | None = None,
    config: PreprocessConfig | None = None,
    strict: bool = False,
) -> tuple[Corpus, list[str]]:
    """Parse and preprocess every .cha file under chat_dir into a Corpus.

    Returns (corpus, errors); in strict mode the first parse failure raises.
    Sidecar metadata wins over @ID headers on conflict.
    """
    chat_dir = Path(chat_dir)
    sidecar = read_metadata_csv(metadata_csv) if metadata_csv else {}
    raws: dict[str, list[RawTranscript]] = {}
    errors: list[str] = []
    files = sorted(chat_dir.rglob("*.cha"))
    for f in files:
        pid, visit = _split_filename(f.stem)
        try:
            raw = parse_chat(f.read_text(encoding="utf-8"), participant_id=pid,
                             visit_index=visit)
        except (ChatParseError, UnicodeDecodeError) as exc:
            msg = f"{f}: {exc}"
            if strict:
                raise ChatParseError(msg) from exc
            errors.append(msg)
            continue
        raws.setdefault(pid, []).append(raw)
    if not raws:
        raise CorpusError(f"no parsable .cha files in {chat_dir}")

    participants = []
    for pid, transcripts in sorted(raws.items()):
        transcripts.sort(key=lambda r: r.visit_index)
        meta = sidecar.get(pid, {})
        group = meta.get("group") or next(
            (r.group for r in transcripts if r.group), None)
        if group not in GROUPS:
            errors.append(f"{pid}: no usable group label; skipped")
            continue
        mmse = dict(meta.get("mmse", {}))
        for r in transcripts:
            if r.mmse is not None and r.visit_index not in mmse:
                mmse[r.visit_index] = r.mmse
        seqs = []
        for r in transcripts:
            seq = preprocess(r, config)
            if len(seq):
                seqs.append(seq)
            else:
                errors.append(f"{pid} visit {r.visit_index}: empty after preprocessing")
        if not seqs:
            errors.append(f"{pid}: no non-empty transcripts; skipped")
            continue
        participants.append(ParticipantRecord(
            participant_id=pid,
            group=group,
            transcripts=tuple(seqs),
            age_at_baseline=meta.get("age", next(
                (r.age for r in transcripts if r.age is not None), None)),
            education=meta.get("education"),
            mmse_history=tuple(sorted(mmse.items())),
        ))
    return Corpus(participants=tuple(participants)), errors


def write_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Canonical preprocessed corpus: one JSON record per transcript."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus.participants:
            for seq in p.transcripts:
                rec = {
                    "participant_id": p.participant_id,
                    "visit": seq.visit_index,
                    "group": p.group,
                    "tokens": list(seq.tokens),
                    "mmse": p.mmse_at(seq.visit_index),
                }
                if p.age_at_baseline is not None:
                    rec["age"] = p.age_at_baseline
                if p.education is not None:
                    rec["education"] = p.education
                fh.write(json.dumps(rec) + "\n")


def read_jsonl(path: str | Path) -> Corpus:
    rows: dict[str, list[dict]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            rows.setdefault(rec["participant_id"], []).append(rec)
    participants = []
    for pid, recs in sorted(rows.items()):
        recs.sort(key=lambda r: r["visit"])
        seqs = []
        mmse = {}
        for r in recs:
            raw = RawTranscript(participant_id=pid, visit_index=r["visit"],
                                utterances=(), mmse=r.get("mmse"))
            seqs.append(TokenSequence(tokens=tuple(r["tokens"]), source=raw))
            if r.get("mmse") is not None:
                mmse[r["visit"]] = r["mmse"]
        first = recs[0]
        participants.append(ParticipantRecord(
            participant_id=pid,
            group=first["group"],
            transcripts=tuple(seqs),
            age_at_baseline=first.get("age"),
            education=first.get("education"),
            mmse_history=tuple(sorted(mmse.items())),
        ))
    if not participants:
        raise CorpusError(f"no records in {path}")
    return Corpus(participants=tuple(participants))
