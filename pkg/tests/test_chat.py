import json
import re
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pplab import (ChatParseError, PreprocessConfig, RawTranscript,
                   parse_chat, preprocess)
from pplab.chat import DEFAULT_FILLERS, preprocess_tokens

FIXTURES = Path(__file__).parent / "fixtures" / "chat"
NO_EOS = PreprocessConfig(append_eos=False)


class TestParseChat:
    def test_participant_utterance_extracted(self):
        raw = parse_chat("*PAR:\tthe boy is on the stool .\n")
        assert raw.utterances == ("the boy is on the stool .",)

    def test_investigator_excluded(self):
        raw = parse_chat("*INV:\ttell me more .\n")
        assert raw.utterances == ()

    def test_dependent_tier_excluded(self):
        raw = parse_chat("*PAR:\tshe laughs .\n%mor:\tpro|she v|laugh .\n")
        assert raw.utterances == ("she laughs .",)
        assert "pro|she" not in " ".join(raw.utterances)

    def test_missing_tab_is_error_with_line_number(self):
        with pytest.raises(ChatParseError, match="line 2"):
            parse_chat("@Begin\n*PAR: no tab here .\n")

    def test_empty_file_is_error(self):
        with pytest.raises(ChatParseError):
            parse_chat("   \n\n")

    def test_continuation_lines_folded(self):
        raw = parse_chat("*PAR:\tthe mother is\n\tdrying dishes .\n")
        assert raw.utterances == ("the mother is drying dishes .",)

    def test_id_header_metadata(self):
        text = ("@ID:\teng|Pitt|PAR|71;|female||ProbableAD||Participant|\n"
                "*PAR:\thello .\n")
        raw = parse_chat(text)
        assert raw.group == "dementia"
        assert raw.age == 71.0
        assert raw.sex == "female"

    def test_control_group_label(self):
        text = ("@ID:\teng|Pitt|PAR|63;|male||Control||Participant|\n"
                "*PAR:\thello .\n")
        assert parse_chat(text).group == "control"


class TestPreprocess:
    def _tokens(self, utterance, config=NO_EOS):
        raw = RawTranscript(participant_id="p", visit_index=0,
                            utterances=(utterance,))
        return list(preprocess(raw, config).tokens)

    def test_lowercase_and_punctuation(self):
        assert self._tokens("Mother is washing dishes .") == [
            "mother", "is", "washing", "dishes"]

    def test_fillers_and_noise_removed(self):
        assert self._tokens("uh the the cookie &=laughs") == [
            "the", "the", "cookie"]

    def test_apostrophe_kept(self):
        assert self._tokens("she can't reach") == ["she", "can't", "reach"]

    def test_eos_appended_per_utterance(self):
        raw = RawTranscript(participant_id="p", visit_index=0,
                            utterances=("the boy .", "the girl ."))
        seq = preprocess(raw, PreprocessConfig(append_eos=True))
        assert seq.tokens == ("the", "boy", "<eos>", "the", "girl", "<eos>")

    def test_empty_result_is_not_an_error(self):
        raw = RawTranscript(participant_id="p", visit_index=0,
                            utterances=("uh um &=coughs .",))
        assert preprocess(raw, NO_EOS).tokens == ()

    def test_bracketed_codes_dropped_words_kept(self):
        assert self._tokens("<the boy> [//] the boy [* err] falls") == [
            "the", "boy", "the", "boy", "falls"]


@pytest.mark.parametrize("name", sorted(
    p.stem for p in FIXTURES.glob("*.cha")))
def test_golden_fixture(name):
    expected = json.loads((FIXTURES / "expected.json").read_text())
    raw = parse_chat((FIXTURES / f"{name}.cha").read_text(),
                     participant_id=name)
    assert list(preprocess(raw, NO_EOS).tokens) == expected[name]


utterance_text = st.text(
    alphabet=st.characters(codec="ascii", exclude_characters="\x00"),
    max_size=80)


@given(utterance_text)
@settings(max_examples=200)
def test_output_charset_and_fillers(text):
    raw = RawTranscript(participant_id="p", visit_index=0, utterances=(text,))
    for tok in preprocess(raw, NO_EOS).tokens:
        assert re.fullmatch(r"[a-z0-9']+", tok), tok
        assert tok not in DEFAULT_FILLERS


@given(utterance_text)
@settings(max_examples=200)
def test_preprocess_idempotent(text):
    raw = RawTranscript(participant_id="p", visit_index=0, utterances=(text,))
    once = preprocess(raw, NO_EOS).tokens
    assert preprocess_tokens(once, NO_EOS) == once
