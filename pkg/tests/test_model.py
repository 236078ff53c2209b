import numpy as np
import pytest

from taxoextract.corpus import ProductRecord
from taxoextract.diffcore import ParameterStore, gradient_check
from taxoextract.model import (MODES, SEP, SEP2, MissingCategoryEmbedding, ModelConfig, TaxonomyTagger,
                               Vocabulary, attention_pool, category_lookup, category_loss, category_probs,
                               collate, concat_condition, cond_self_att, encode, gate_condition, load_config,
                               model_tokens, multitask_loss, prefix_tokens, write_config)
from taxoextract.taxonomy import CategoryEmbeddingTable, flat_targets, hierarchical_targets

SMALL = dict(word_dim=6, hidden=4, cat_dim=3, att_dim=5, pool_dim=4)


def random_table(tree, dim, seed=0):
    rng = np.random.default_rng(seed)
    vecs = rng.uniform(-0.5, 0.5, size=(len(tree), dim))
    return CategoryEmbeddingTable(list(tree.order), vecs)


def build(tree, records, seed=0, **overrides):
    cfg = ModelConfig(**{**SMALL, **overrides, "seed": seed})
    vocab = Vocabulary.build(model_tokens(r, cfg, tree)[1] for r in records)
    index, table = category_lookup(tree, random_table(tree, cfg.cat_dim) if cfg.uses_category_embedding else None)
    model = TaxonomyTagger(cfg, len(vocab), len(tree.label_nodes), table)
    batch = collate(encode(records, vocab, cfg, tree, index, "flavor"))
    return model, batch, vocab, index


# -- functional pieces ----------------------------------------------------------

def test_cond_self_att_zero_parameters():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(1, 4, 6))
    mask = np.ones((1, 4), dtype=bool)
    ec = rng.normal(size=(1, 3))
    out, alpha, _ = cond_self_att(H, ec, mask, np.zeros((5, 6)), np.zeros((5, 6)), np.zeros((5, 3)),
                                  np.zeros(5), np.zeros(5), np.zeros(1))
    assert np.all(alpha == 0.5)
    assert np.allclose(out[0], 0.5 * H[0].sum(axis=0)[None, :])


def test_cond_self_att_depends_on_category_and_masks():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(1, 4, 6))
    mask = np.array([[True, True, True, False]])
    W = [rng.normal(size=s) for s in ((5, 6), (5, 6), (5, 3))]
    b = [rng.normal(size=5), rng.normal(size=5), rng.normal(size=1)]
    out1, a1, _ = cond_self_att(H, rng.normal(size=(1, 3)), mask, *W, *b)
    out2, a2, _ = cond_self_att(H, rng.normal(size=(1, 3)), mask, *W, *b)
    assert not np.allclose(a1, a2)
    assert np.all(a1[0, 3] == 0) and np.all(a1[0, :, 3] == 0)
    assert np.all(out1[0, 3] == 0)
    assert np.all((a1[0, :3, :3] > 0) & (a1[0, :3, :3] < 1))


def test_cond_self_att_single_token():
    rng = np.random.default_rng(2)
    H = rng.normal(size=(1, 1, 6))
    W = [rng.normal(size=s) for s in ((5, 6), (5, 6), (5, 3))]
    out, alpha, _ = cond_self_att(H, rng.normal(size=(1, 3)), np.ones((1, 1), dtype=bool), *W,
                                  rng.normal(size=5), rng.normal(size=5), rng.normal(size=1))
    assert 0 < alpha[0, 0, 0] < 1
    assert np.allclose(out[0, 0], alpha[0, 0, 0] * H[0, 0])


def test_gate_examples():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(2, 3, 4))
    ec = rng.normal(size=(2, 3))
    out, _ = gate_condition(H, ec, np.zeros((4, 4)), np.zeros((4, 3)))
    assert np.allclose(out, 0.5 * H)
    big, _ = gate_condition(H, np.ones((2, 3)), np.zeros((4, 4)), np.full((4, 3), 20.0))
    assert np.allclose(big, H, atol=1e-20 + 1e-8 * np.abs(H).max())
    rnd, _ = gate_condition(H, ec, rng.normal(size=(4, 4)), rng.normal(size=(4, 3)))
    assert np.all(np.linalg.norm(rnd, axis=-1) <= np.linalg.norm(H, axis=-1))


def test_concat_dimensions(beer_tree, toy_records):
    cfg = ModelConfig(mode="concat-wemb")
    model, _, _, _ = build(beer_tree, toy_records, mode="concat-wemb", word_dim=100, hidden=100, cat_dim=50)
    assert model.store["encoder.fwd.W"].shape[1] == 150
    model, _, _, _ = build(beer_tree, toy_records, mode="concat-lstm", word_dim=100, hidden=100, cat_dim=50)
    assert model.store["emit.W"].shape[1] == 250
    assert cfg.d == 200


def test_concat_lstm_with_zero_category_matches_none(beer_tree, toy_records):
    plain, batch, vocab, _ = build(beer_tree, toy_records, mode="none", multitask="off")
    cat, _, _, index = build(beer_tree, toy_records, mode="concat-lstm", multitask="off")
    for name in plain.store.names():
        if name == "emit.W":
            cat.store.values[name][:, :plain.config.d] = plain.store[name]
        else:
            cat.store.values[name][...] = plain.store[name]
    cat.store.values["category.table"][...] = 0.0
    cbatch = collate(encode(toy_records, vocab, cat.config, beer_tree, index, "flavor"))
    assert np.allclose(cat.emissions(cbatch), plain.emissions(batch), atol=1e-14)


def test_concat_masks_padding():
    X = np.ones((1, 3, 2))
    out = concat_condition(X, np.array([[7.0]]), np.array([[True, True, False]]))
    assert out.shape == (1, 3, 3)
    assert list(out[0, :, 2]) == [7, 7, 0]


def test_prefix_variants(beer_tree):
    toks = ["acme", "lager"]
    assert prefix_tokens(toks, "c42", "id") == ["c42", SEP, "acme", "lager"]
    assert prefix_tokens(toks, "ale", "name", beer_tree) == ["pale", "ale", SEP, "acme", "lager"]
    assert prefix_tokens(toks, "lager", "path", beer_tree) == ["grocery", SEP2, "beer", SEP2, "lager", SEP,
                                                               "acme", "lager"]
    with pytest.raises(ValueError):
        prefix_tokens(toks, "x", "other")


@pytest.mark.parametrize("mode", ["prefix-id", "prefix-name", "prefix-path"])
def test_prefix_positions_never_decoded(beer_tree, toy_records, mode):
    model, batch, _, _ = build(beer_tree, toy_records, mode=mode, multitask="off")
    # push every emission towards B so any leak into the prefix would show up
    model.store.values["emit.b"][...] = [50.0, 0.0, 0.0, 0.0]
    for ex, tags in zip(batch.examples, model.decode(batch)):
        assert len(tags) == len(ex.text)
        assert ex.offset > 0


def test_attention_pool_examples():
    rng = np.random.default_rng(4)
    W, b, u = rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=3)
    same = np.tile(rng.normal(size=4), (1, 5, 1))
    _, beta, _ = attention_pool(same, np.ones((1, 5), dtype=bool), W, b, u)
    assert np.allclose(beta, 0.2)
    one = rng.normal(size=(1, 1, 4))
    h, _, _ = attention_pool(one, np.ones((1, 1), dtype=bool), W, b, u)
    assert np.allclose(h[0], one[0, 0])
    H = rng.normal(size=(3, 6, 4))
    mask = np.array([[1] * 6, [1] * 3 + [0] * 3, [1] + [0] * 5], dtype=bool)
    _, beta, _ = attention_pool(H, mask, W, b, u)
    assert np.allclose(beta.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(beta[~mask] == 0)
    with pytest.raises(ValueError):
        attention_pool(np.zeros((1, 0, 4)), np.zeros((1, 0), dtype=bool), W, b, u)


def test_category_probs():
    h = np.random.default_rng(5).normal(size=(2, 4))
    assert np.all(category_probs(h, np.zeros((7, 4)), np.zeros(7)) == 0.5)
    W = np.random.default_rng(6).normal(size=(7, 4))
    base = category_probs(h, W, np.zeros(7))
    shifted = category_probs(h, W, np.eye(7)[2])
    assert np.all(shifted[:, 2] > base[:, 2])
    assert np.array_equal(np.delete(shifted, 2, axis=1), np.delete(base, 2, axis=1))


def test_category_loss_examples(beer_tree):
    assert category_loss(np.array([0.5]), np.array([1.0]), np.array([1.0])) == pytest.approx(np.log(2))
    t = hierarchical_targets(beer_tree, "lager", w=0.5)
    assert category_loss(t.labels.copy(), t.labels, t.weights) <= len(t.labels) * 1.0 * 1e-11
    rng = np.random.default_rng(7)
    f = flat_targets(beer_tree, "ale")
    p = rng.uniform(0.01, 0.99, size=len(f.labels))
    oracle = -sum(np.log(pi) if yi else np.log(1 - pi) for pi, yi in zip(p, f.labels))
    assert category_loss(p, f.labels, f.weights) == pytest.approx(oracle, abs=1e-12)


def test_multitask_loss_examples():
    assert multitask_loss(2.0, 4.0, 1.0) == 2.0
    assert multitask_loss(2.0, 4.0, 0.0) == 4.0
    assert multitask_loss(2.0, 4.0, 0.5) == 3.0
    with pytest.raises(ValueError):
        multitask_loss(1.0, 1.0, 1.5)


def test_config_round_trip(tmp_path):
    cfg = ModelConfig(mode="gate", gamma=0.25, fallback=False)
    path = tmp_path / "c.ini"
    write_config(cfg, path)
    assert load_config(path) == cfg
    path.write_text("# defaults otherwise\nmode = none\n")
    assert load_config(path) == ModelConfig(mode="none")
    path.write_text("bogus = 1\n")
    with pytest.raises(ValueError, match="bogus"):
        load_config(path)


def test_config_defaults():
    cfg = ModelConfig()
    assert (cfg.d, cfg.cat_dim, cfg.att_dim, cfg.pool_dim) == (200, 50, 50, 50)
    assert (cfg.gamma, cfg.w, cfg.dropout, cfg.batch_size, cfg.max_epochs, cfg.patience) == (0.5, 1.0, 0.4, 32, 30, 3)
    with pytest.raises(ValueError):
        ModelConfig(w=0.0)


# -- whole model ------------------------------------------------------------------

@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("multitask", ["off", "flat", "hier"])
def test_whole_model_gradients(beer_tree, toy_records, mode, multitask):
    model, batch, _, _ = build(beer_tree, toy_records[:2], mode=mode, multitask=multitask, seed=3)
    s = model.store

    def loss():
        return model.forward_backward(batch, True, np.random.default_rng(11), compute_grad=False).total

    s.zero_grad()
    model.forward_backward(batch, True, np.random.default_rng(11))
    trainable = {n: s.values[n] for n in s.trainable()}
    report = gradient_check(loss, trainable, s.grads, samples=8, seed=1)
    assert report.max_rel_error <= 1e-4, report.per_param


def test_frozen_category_table_gets_no_update(beer_tree, toy_records):
    model, batch, _, _ = build(beer_tree, toy_records, mode="cond-self-att")
    assert "category.table" not in model.store.trainable()


def test_category_changes_tags_only_when_conditioned(beer_tree, toy_records):
    rng = np.random.default_rng(8)
    for mode, expect_change in (("cond-self-att", True), ("none", False)):
        model, batch, vocab, index = build(beer_tree, toy_records, mode=mode, multitask="off", seed=2)
        for name in model.store.trainable():
            model.store.values[name][...] = rng.normal(scale=1.5, size=model.store[name].shape)
        base = model.decode(batch)
        changed = False
        for cat in beer_tree.label_nodes:
            moved = [ProductRecord(r.id, r.title, cat, r.description, r.gold_values) for r in toy_records]
            other = collate(encode(moved, vocab, model.config, beer_tree, index, "flavor"))
            changed |= model.decode(other) != base
        assert changed == expect_change


def test_hard_parameter_sharing(beer_tree, toy_records):
    model, batch, _, _ = build(beer_tree, toy_records, mode="cond-self-att", multitask="hier")
    before = model.loss(batch)
    model.store.values["encoder.fwd.W"] += 0.3
    after = model.loss(batch)
    assert after.extraction != before.extraction
    assert after.category != before.category


def test_fallback_and_strict_missing_category(beer_tree, toy_records):
    cfg = ModelConfig(**SMALL, mode="gate")
    vocab = Vocabulary.build(model_tokens(r, cfg, beer_tree)[1] for r in toy_records)
    table = random_table(beer_tree, cfg.cat_dim)
    partial = CategoryEmbeddingTable([n for n in table.nodes if n != "ale"],
                                     table.vectors[[i for i, n in enumerate(table.nodes) if n != "ale"]])
    index, matrix = category_lookup(beer_tree, partial)
    examples = encode(toy_records, vocab, cfg, beer_tree, index, "flavor")
    assert [e.category_row for e in examples][1] == -1
    model = TaxonomyTagger(cfg, len(vocab), len(beer_tree.label_nodes), matrix)
    model.loss(collate(examples))
    assert model.fallback_count == 1
    with pytest.raises(MissingCategoryEmbedding, match="ale"):
        encode(toy_records, vocab, cfg.replace(fallback=False), beer_tree, index, "flavor")


def test_vocabulary_specials_and_unknown():
    vocab = Vocabulary.build([["b", "a"], ["a"]])
    assert vocab.itos[:2] == ["<PAD>", "<UNK>"]
    assert vocab.ids(["a", "zzz"]) == [vocab.stoi["a"], 1]


def test_model_is_deterministic(beer_tree, toy_records):
    a, batch, _, _ = build(beer_tree, toy_records, seed=4)
    b, _, _, _ = build(beer_tree, toy_records, seed=4)
    for name in a.store.names():
        assert np.array_equal(a.store[name], b.store[name])
    assert a.loss(batch).total == b.loss(batch).total


def test_parameter_store_seed_matters():
    assert not np.array_equal(ParameterStore(0).uniform("w", (3,), 1.0), ParameterStore(1).uniform("w", (3,), 1.0))
