import pytest

from deepck.backends import BigramBackend, WordVocab, chain_backend, uniform_backend
from deepck.retrieval import ingest_corpus
from deepck.triples import LabeledTriple

TOY_WORDS = ["apple", "is", "red", "whale", "at", "location", "ocean", "green", "sweet", "fruit"]


@pytest.fixture
def toy_vocab():
    return WordVocab(TOY_WORDS)


@pytest.fixture
def toy_uniform(toy_vocab):
    return uniform_backend(toy_vocab)


@pytest.fixture
def toy_chain(toy_vocab):
    return chain_backend(toy_vocab, [["apple", "is", "red"], ["whale", "at", "location", "ocean"]])


@pytest.fixture
def toy_bigram(toy_vocab):
    rows = {
        toy_vocab.id("apple"): {toy_vocab.id("is"): 0.7, toy_vocab.id("red"): 0.2},
        toy_vocab.id("is"): {toy_vocab.id("red"): 0.5, toy_vocab.id("green"): 0.3},
    }
    start = {toy_vocab.id("apple"): 0.6, toy_vocab.id("whale"): 0.3}
    return BigramBackend(toy_vocab, rows=rows, start_row=start)


@pytest.fixture
def apple_triple():
    return LabeledTriple("apple", "Is", "red")


@pytest.fixture
def toy_corpus():
    text = (
        "the apple is quite red. "
        "a whale swims in the deep ocean. "
        "red paint covers the old barn. "
        "this apple tastes sweet and red. "
        "yesterday we saw a whale near the shore."
    )
    return ingest_corpus(text)
