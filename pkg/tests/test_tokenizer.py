import pytest

from epicast.errors import EmptyCorpus
from epicast.neural.tokenizer import BOS, SPECIAL_TOKEN, UNK, build_vocab, detokenize, split_tokens, tokenize
from epicast.targets import CLASS_TOKENS


def test_small_corpus():
    vocab = build_vocab(["a b", "b c"])
    assert len(vocab) == 12
    assert set(vocab.tokens) - {"a", "b", "c"} == set((BOS, UNK, "<pad>", SPECIAL_TOKEN) + CLASS_TOKENS)
    assert vocab.tokens[4] == "b"  # most frequent word first


def test_unseen_word_maps_to_unk():
    vocab = build_vocab(["a b", "b c"])
    ids = tokenize("a z", vocab)
    assert ids[2] == vocab.id(UNK)
    assert ids[0] == vocab.id(BOS)


def test_empty_text_is_bos_only():
    assert tokenize("", build_vocab(["a"])) == [build_vocab(["a"]).id(BOS)]


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_vocab([])


def test_class_tokens_last_and_kept_whole():
    vocab = build_vocab(["The answer is <Moderate Increase>"])
    assert vocab.tokens[-5:] == CLASS_TOKENS
    assert split_tokens("is <Moderate Increase>") == ["is", "<Moderate Increase>"]
    ids = tokenize("The answer is <Moderate Increase>", vocab)
    assert detokenize(ids, vocab)[-1] == "<Moderate Increase>"


def test_punctuation_separates_and_case_folds():
    assert split_tokens("Rate per 100,000 people. COVID-19 rose.") == \
        ["rate", "per", "100", "000", "people", "covid-19", "rose"]
    assert split_tokens(f"series is {SPECIAL_TOKEN} .") == ["series", "is", SPECIAL_TOKEN]


def test_stable_across_runs():
    corpus = ["x y z y", "z z w"]
    assert build_vocab(corpus) == build_vocab(list(corpus))
