import math
from dataclasses import replace

import numpy as np
import pytest

from epicast.data.assemble import assemble_dataset
from epicast.errors import MissingBundle, NonFiniteLoss
from epicast.neural.bundle import MAGIC, config_hash, load_bundle, read_blob, save_bundle
from epicast.neural.decoder import DecoderConfig
from epicast.neural.model import (ModelConfig, TrainConfig, class_distribution, feature_stats, fit, init_bundle,
                                  make_example, mean_loss, predict, predict_proba, train)
from epicast.neural.tokenizer import build_vocab
from epicast.targets import HtcClass
from epicast.textualizer import assemble_prompt

TINY = ModelConfig(decoder=DecoderConfig(d_model=16, n_blocks=1, n_heads=2, d_ff=32, max_len=512),
                   train=TrainConfig(lr=1e-2, batch_size=5, epochs=1))


@pytest.fixture(scope="module")
def toy(fixture_panels):
    """Twenty records with four of each class, plus a matching vocabulary and bundle."""
    records = assemble_dataset(fixture_panels)[:20]
    targets = [HtcClass(i % 5 + 1) for i in range(20)]
    docs = [assemble_prompt(r, 1, t) for r, t in zip(records, targets)]
    vocab = build_vocab(d.text for d in docs)
    examples = [make_example(vocab, d, r) for d, r in zip(docs, records)]
    return records, targets, vocab, examples


def _bundle(toy, seed=0, config=TINY):
    _, _, vocab, examples = toy
    return init_bundle(config, vocab, 1, seed, *feature_stats(examples))


def test_loss_at_init_near_ln5(toy):
    assert mean_loss(_bundle(toy), toy[3]) == pytest.approx(math.log(5), abs=0.01)


def test_training_lowers_loss_and_keeps_body_frozen(toy):
    bundle = _bundle(toy)
    frozen = {n: bundle.params[n].data.copy() for n in bundle.frozen_names()}
    trainable = {n: p.data.copy() for n, p in bundle.all_params().items() if p.requires_grad}
    before = mean_loss(bundle, toy[3])
    cfg = replace(TINY.train, max_steps=200)
    bundle, trace = train(bundle, toy[3], cfg)
    assert len(trace) == 200 and trace[-1]["step"] == 200
    assert mean_loss(bundle, toy[3]) < before
    for n, v in frozen.items():
        assert np.array_equal(bundle.params[n].data, v), n
    assert any(not np.array_equal(bundle.all_params()[n].data, v) for n, v in trainable.items())


def test_frozen_set_covers_body(toy):
    names = set(_bundle(toy).frozen_names())
    assert "pos_emb" in names and "ln_f.g" in names
    assert all(n.startswith(("pos", "block", "ln_f")) for n in names)
    assert {"tok_emb", "out.W", "out.b"}.isdisjoint(names)


def test_training_deterministic(toy):
    cfg = replace(TINY.train, max_steps=8)
    a, _ = train(_bundle(toy), toy[3], cfg, seed=3)
    b, _ = train(_bundle(toy), toy[3], cfg, seed=3)
    for n, p in a.all_params().items():
        assert np.array_equal(p.data, b.all_params()[n].data)


def test_body_identical_across_seeds(toy):
    a, b = _bundle(toy, 0), _bundle(toy, 1)
    assert all(np.array_equal(a.params[n].data, b.params[n].data) for n in a.frozen_names())
    assert not np.array_equal(a.params["tok_emb"].data, b.params["tok_emb"].data)


def test_non_finite_loss(toy):
    bundle = _bundle(toy)
    bundle.params["out.b"].data[:] = np.nan
    with pytest.raises(NonFiniteLoss):
        train(bundle, toy[3], replace(TINY.train, max_steps=1))


def test_predict_near_uniform_and_deterministic(toy):
    records = toy[0]
    bundle = _bundle(toy)
    d1, d2 = predict(bundle, records[0]), predict(bundle, records[0])
    assert d1 == d2
    assert np.allclose(d1.probs, 0.2, atol=0.01)
    assert sum(d1.probs) == pytest.approx(1.0, abs=1e-9)


def test_predict_genomic_toggle_changes_output(toy):
    bundle = _bundle(toy, config=replace(TINY, decoder=replace(TINY.decoder, out_std=0.5)))
    rec = toy[0][10]
    on = predict(bundle, replace(rec, include_genomic=True)).probs
    off = predict(bundle, replace(rec, include_genomic=False)).probs
    assert not np.allclose(on, off)


def test_class_distribution(toy):
    vocab = toy[2]
    logits = np.random.default_rng(0).normal(size=len(vocab))
    logits[vocab.class_ids] = 0.7
    assert np.allclose(class_distribution(logits, vocab).probs, 0.2, atol=1e-15)
    logits[vocab.class_ids] = [0.1, 2.0, -1.0, 0.5, 0.0]
    base = class_distribution(logits, vocab).probs
    assert np.allclose(class_distribution(logits + 13.0, vocab).probs, base, atol=1e-15)
    logits[vocab.class_ids[3]] = 52.0
    assert class_distribution(logits, vocab).probs[3] > 1 - 1e-9


def test_bundle_round_trip(toy, tmp_path):
    bundle, _ = train(_bundle(toy), toy[3], replace(TINY.train, max_steps=3))
    save_bundle(bundle, tmp_path / "a.bundle")
    again = load_bundle(tmp_path / "a.bundle")
    save_bundle(again, tmp_path / "b.bundle")
    assert (tmp_path / "a.bundle").read_bytes() == (tmp_path / "b.bundle").read_bytes()
    assert (tmp_path / "a.bundle").read_bytes().startswith(MAGIC)
    assert np.array_equal(predict_proba(bundle, toy[3]), predict_proba(again, toy[3]))
    header, arrays = read_blob(tmp_path / "a.bundle")
    assert header["config_hash"] == config_hash(TINY)
    assert set(arrays) >= {"tok_emb", "out.W", "feat_mean", "feat_std"}


def test_missing_bundle(tmp_path):
    with pytest.raises(MissingBundle):
        load_bundle(tmp_path / "nope.bundle")
    (tmp_path / "bad.bundle").write_bytes(b"not a bundle")
    with pytest.raises(MissingBundle):
        load_bundle(tmp_path / "bad.bundle")


def test_no_encoder_variant(toy):
    bundle = _bundle(toy, config=replace(TINY, encoder_kind=None))
    assert bundle.encoder is None
    assert predict_proba(bundle, toy[3][:2]).shape == (2, 5)


def test_fit_end_to_end(toy):
    records, targets, _, _ = toy
    cfg = replace(TINY, train=replace(TINY.train, max_steps=4))
    bundle, trace = fit(records[:15], targets[:15], 1, cfg, seed=0, val_records=records[15:],
                        val_targets=targets[15:])
    assert bundle.vocab.tokens[-5:] == tuple(c.token for c in HtcClass)
    assert len(trace) == 4


def test_model_config_round_trip():
    cfg = replace(TINY, encoder_kind=None)
    d = cfg.to_dict()
    assert ModelConfig.from_dict(d) == cfg
    assert ModelConfig.from_dict({**d, "encoder_kind": "none"}).encoder_kind is None
    with pytest.raises(ValueError):
        ModelConfig(encoder_kind="Transformer")
