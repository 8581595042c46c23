import pytest

from pplab import LMConfig, TokenSequence, Vocabulary


@pytest.fixture
def tiny_vocab():
    return Vocabulary(["<unk>", "<eos>", "the", "boy", "is", "falling",
                       "mother", "washing", "dishes", "cookie"])


@pytest.fixture
def tiny_config():
    return LMConfig(embedding_dim=8, layer_dims=(8,), tie_embeddings=True,
                    weight_drop=0.0, batch_size=2, bptt_window=4, epochs=2,
                    learning_rate=0.5, grad_clip=1.0, seed=0)


@pytest.fixture
def tiny_seq():
    return TokenSequence(tokens=("the", "boy", "is", "falling", "<eos>",
                                 "mother", "is", "washing", "dishes", "<eos>"))
