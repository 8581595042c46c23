import struct

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from pplab import (CheckpointError, init_params, load_checkpoint,
                   load_checkpoint_file, save_checkpoint,
                   save_checkpoint_file)


@pytest.fixture
def params(tiny_config, tiny_vocab):
    return init_params(tiny_config, tiny_vocab, seed=7)


def assert_same(a, b):
    assert a.config == b.config
    assert a.vocab == b.vocab
    assert a.tensor_names() == b.tensor_names()
    for name in a.tensor_names():
        assert torch.equal(a.tensors[name], b.tensors[name])


def test_roundtrip_bit_exact(params):
    blob = save_checkpoint(params)
    assert_same(params, load_checkpoint(blob))
    assert save_checkpoint(load_checkpoint(blob)) == blob


def test_roundtrip_float64(params):
    blob = save_checkpoint(params.to_dtype(torch.float64))
    loaded = load_checkpoint(blob)
    assert loaded.tensors["embedding"].dtype == torch.float64
    assert_same(params.to_dtype(torch.float64), loaded)


def test_file_roundtrip(params, tmp_path):
    path = tmp_path / "model.bin"
    save_checkpoint_file(params, path)
    assert_same(params, load_checkpoint_file(path))


def expect_code(blob, code):
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(blob)
    assert exc.value.code == code


def test_bad_magic(params):
    blob = save_checkpoint(params)
    expect_code(b"XXXX" + blob[4:], "bad_magic")


def test_bad_version(params):
    blob = save_checkpoint(params)
    expect_code(blob[:4] + struct.pack("<I", 99) + blob[8:], "bad_version")


def test_truncated_short_prefix():
    expect_code(b"PPLM\x01", "truncated")


def test_truncated_blob(params):
    blob = save_checkpoint(params)
    expect_code(blob[:-3], "truncated")


def test_trailing_bytes(params):
    blob = save_checkpoint(params)
    expect_code(blob + b"\x00\x00", "shape_mismatch")


def test_corrupt_header(params):
    blob = save_checkpoint(params)
    hlen = struct.unpack("<I", blob[8:12])[0]
    broken = blob[:12] + b"{" * hlen + blob[12 + hlen:]
    expect_code(broken, "bad_header")


@given(st.binary(max_size=200))
@settings(max_examples=300)
def test_arbitrary_bytes_never_crash(data):
    try:
        load_checkpoint(data)
    except CheckpointError as exc:
        assert exc.code in {"bad_magic", "bad_version", "truncated",
                            "bad_header", "shape_mismatch"}


def _reference_blob():
    from pplab import LMConfig, Vocabulary
    cfg = LMConfig(embedding_dim=8, layer_dims=(8,), tie_embeddings=True,
                   weight_drop=0.0, batch_size=2, bptt_window=4, epochs=1,
                   learning_rate=0.5)
    vocab = Vocabulary(["<unk>", "<eos>", "a", "b", "c"])
    return save_checkpoint(init_params(cfg, vocab, seed=1))


@given(st.integers(0, 5000), st.binary(max_size=8))
@settings(max_examples=100)
def test_mutated_checkpoint_loads_or_reports(pos, junk):
    blob = _reference_blob()
    pos = pos % len(blob)
    mutated = blob[:pos] + junk + blob[pos + len(junk):]
    try:
        load_checkpoint(mutated)
    except CheckpointError:
        pass
