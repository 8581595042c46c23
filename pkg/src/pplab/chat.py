"""CHAT (.cha) transcript parsing and text normalization.

Parsing keeps participant utterances verbatim (inline annotation codes
included); normalization strips annotation and punctuation down to the
plain spoken tokens.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace

EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"

DEFAULT_FILLERS = frozenset({"um", "uh", "ah", "er", "hm", "mhm", "eh"})
# CLAN markers for unintelligible / untranscribed material.
NOISE_TOKENS = frozenset({"xxx", "yyy", "www"})

_SPEAKER_RE = re.compile(r"^\*([A-Z]+[A-Z0-9]*):")
_TIER_RE = re.compile(r"^%[a-z]+:")
_AGE_RE = re.compile(r"^(\d+);")

_BRACKET_RE = re.compile(r"\[[^\[\]]*\]")
_AMP_RE = re.compile(r"&\S+")
_PAUSE_RE = re.compile(r"\(\.+\)")
_TOKEN_STRIP_RE = re.compile(r"[^a-z0-9']+")


class ChatParseError(ValueError):
    """Raised for malformed or empty CHAT input."""


@dataclass(frozen=True)
class RawTranscript:
    participant_id: str
    visit_index: int
    utterances: tuple[str, ...]
    mmse: int | None = None
    group: str | None = None
    age: float | None = None
    sex: str | None = None


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source: RawTranscript | None = None

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def participant_id(self) -> str:
        return self.source.participant_id if self.source else ""

    @property
    def visit_index(self) -> int:
        return self.source.visit_index if self.source else 0


@dataclass(frozen=True)
class PreprocessConfig:
    append_eos: bool = True
    fillers: frozenset[str] = DEFAULT_FILLERS
    eos_token: str = EOS_TOKEN


_DEMENTIA_GROUP_LABELS = {"ad", "dat", "probablead", "possiblead", "dementia", "vascular"}


def _classify_group(token: str) -> str | None:
    t = token.lower()
    if t == "control":
        return "control"
    if t in _DEMENTIA_GROUP_LABELS or "dementia" in t:
        return "dementia"
    return None


def _parse_id_header(fields: list[str]) -> dict:
    """Pull age / sex / group out of an @ID tier; conventions vary by corpus."""
    meta: dict = {}
    for f in fields:
        f = f.strip()
        m = _AGE_RE.match(f)
        if m and "age" not in meta:
            meta["age"] = float(m.group(1))
        elif f.lower() in {"male", "female"} and "sex" not in meta:
            meta["sex"] = f.lower()
        else:
            g = _classify_group(f)
            if g and "group" not in meta:
                meta["group"] = g
    return meta


def parse_chat(
    text: str,
    participant_id: str = "",
    visit_index: int = 0,
) -> RawTranscript:
    """Extract participant utterances and header metadata from one CHAT file.

    Only ``*PAR`` tiers contribute utterances; investigator tiers, dependent
    ``%`` tiers and ``@`` metadata lines never do. Continuation lines
    (leading tab) are folded into the open tier.
    """
    if not text.strip():
        raise ChatParseError("empty CHAT file")

    utterances: list[str] = []
    meta: dict = {}
    pid = participant_id
    open_par: int | None = None  # index into utterances, when a *PAR tier is open

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            open_par = None
            continue
        if line.startswith(("\t", " ")):
            if open_par is not None:
                utterances[open_par] += " " + line.strip()
            continue
        if line.startswith("@"):
            open_par = None
            if line.startswith("@ID:"):
                fields = line[len("@ID:"):].strip().split("|")
                if len(fields) > 2 and fields[2].strip() == "PAR":
                    meta.update(_parse_id_header(fields))
            elif line.startswith("@PID:") and not pid:
                pid = line[len("@PID:"):].strip()
            continue
        if line.startswith("%"):
            open_par = None
            if not _TIER_RE.match(line):
                raise ChatParseError(f"line {lineno}: malformed dependent tier")
            continue
        m = _SPEAKER_RE.match(line)
        if m:
            rest = line[m.end():]
            if not rest.startswith("\t"):
                raise ChatParseError(
                    f"line {lineno}: no tab after speaker tag *{m.group(1)}:"
                )
            if m.group(1) == "PAR":
                utterances.append(rest.strip())
                open_par = len(utterances) - 1
            else:
                open_par = None
            continue
        raise ChatParseError(f"line {lineno}: unrecognized line {line[:40]!r}")

    return RawTranscript(
        participant_id=pid,
        visit_index=visit_index,
        utterances=tuple(u for u in utterances if u),
        mmse=meta.get("mmse"),
        group=meta.get("group"),
        age=meta.get("age"),
        sex=meta.get("sex"),
    )


def _clean_utterance(utt: str, config: PreprocessConfig) -> list[str]:
    s = utt
    # bracketed annotation codes, possibly nested one level
    for _ in range(3):
        s2 = _BRACKET_RE.sub(" ", s)
        if s2 == s:
            break
        s = s2
    s = _AMP_RE.sub(" ", s)       # &=events, &-fillers, &fragments
    s = _PAUSE_RE.sub(" ", s)     # (.), (..), (...)
    s = s.replace("(", "").replace(")", "")  # shortenings: (be)cause -> because
    s = s.replace("<", " ").replace(">", " ")
    s = s.lower()
    out: list[str] = []
    for piece in s.split():
        if piece == config.eos_token:
            out.append(piece)
            continue
        tok = _TOKEN_STRIP_RE.sub("", piece).strip("'")
        if not tok:
            continue
        if tok in config.fillers or tok in NOISE_TOKENS:
            continue
        out.append(tok)
    return out


def preprocess(raw: RawTranscript, config: PreprocessConfig | None = None) -> TokenSequence:
    """Lowercase, strip annotation/punctuation (apostrophes kept), drop
    fillers and noise; optionally append an end-of-utterance marker."""
    config = config or PreprocessConfig()
    tokens: list[str] = []
    for utt in raw.utterances:
        cleaned = _clean_utterance(utt, config)
        if not cleaned:
            continue
        tokens.extend(cleaned)
        if config.append_eos and cleaned[-1] != config.eos_token:
            tokens.append(config.eos_token)
    return TokenSequence(tokens=tuple(tokens), source=raw)


def preprocess_tokens(tokens: list[str] | tuple[str, ...],
                      config: PreprocessConfig | None = None) -> tuple[str, ...]:
    """Run the normalization rules over an already-tokenized stream."""
    config = config or PreprocessConfig()
    raw = RawTranscript(participant_id="", visit_index=0,
                        utterances=(" ".join(tokens),))
    cfg = replace(config, append_eos=False)
    return preprocess(raw, cfg).tokens
