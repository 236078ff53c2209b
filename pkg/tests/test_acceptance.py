"""Acceptance suite: one PASS/FAIL line per criterion, each checked at its stated tolerance."""
import json
import time

import numpy as np
import pytest

from taxoextract import synth
from taxoextract.cli import main as cli_main
from taxoextract.corpus import split_dataset
from taxoextract.crf import crf_neg_log_likelihood, crf_nll, viterbi_batch
from taxoextract.diffcore import BiLSTM, ParameterStore, gradient_check
from taxoextract.evaluation import (MATCHED, WRONG, ProductEvalOutcome, classification_metrics,
                                    extraction_metrics, judge)
from taxoextract.model import (ModelConfig, TaxonomyTagger, Vocabulary, category_loss, category_lookup,
                               collate, encode, model_tokens)
from taxoextract.taxonomy import hierarchical_targets, train_poincare
from taxoextract.training import extract_values, predict_category_probs, train

from conftest import binary_tree
from test_crf import all_legal, path_score, random_transitions


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


def test_criterion_1_gradients(verdict, beer_tree, toy_records):
    start = time.time()
    cfg = ModelConfig(mode="cond-self-att", multitask="hier", seed=0)
    records = toy_records[:2]
    vocab = Vocabulary.build(model_tokens(r, cfg, beer_tree)[1] for r in records)
    rng = np.random.default_rng(0)
    from taxoextract.taxonomy import CategoryEmbeddingTable
    table = CategoryEmbeddingTable(list(beer_tree.order), rng.uniform(-0.3, 0.3, size=(len(beer_tree), 50)))
    index, matrix = category_lookup(beer_tree, table)
    model = TaxonomyTagger(cfg, len(vocab), len(beer_tree.label_nodes), matrix)
    batch = collate(encode(records, vocab, cfg, beer_tree, index, "flavor"))
    s = model.store

    def loss():
        return model.forward_backward(batch, True, np.random.default_rng(5), compute_grad=False).total

    s.zero_grad()
    model.forward_backward(batch, True, np.random.default_rng(5))
    whole = gradient_check(loss, {n: s.values[n] for n in s.trainable()}, s.grads, samples=12, seed=1)

    # stand-alone layer checks
    ls = ParameterStore(2)
    lstm = BiLSTM(ls, "enc", 5, 4)
    x = rng.normal(size=(2, 4, 5))
    mask = np.array([[1, 1, 1, 1], [1, 1, 0, 0]], dtype=bool)
    probe = rng.normal(size=(2, 4, 8))
    ls.zero_grad()
    _, cache = lstm.forward(x, mask)
    lstm.backward(probe, cache)
    lstm_err = gradient_check(lambda: float(np.sum(lstm.forward(x, mask)[0] * probe)), ls.values, ls.grads,
                              samples=30).max_rel_error
    em = rng.normal(size=(2, 4, 4))
    tags = np.array([[0, 1, 3, 2], [2, 0, 3, 2]])
    tr = random_transitions(rng)
    _, d_em, _ = crf_nll(em, tags, np.array([4, 3]), tr)
    crf_err = gradient_check(lambda: float(crf_nll(em, tags, np.array([4, 3]), tr, need_grad=False)[0].sum()),
                             {"em": em}, {"em": d_em}, samples=32).max_rel_error
    per_layer = max(max(whole.per_param.values()), lstm_err, crf_err)
    elapsed = time.time() - start
    ok = whole.max_rel_error <= 1e-4 and per_layer <= 1e-4 and elapsed <= 60
    verdict("criterion 1 gradient correctness", ok,
            f"full max rel err {whole.max_rel_error:.2e} over {len(whole.per_param)} tensors, "
            f"worst layer {per_layer:.2e}, {elapsed:.1f}s")


def test_criterion_2_crf_exactness(verdict):
    start = time.time()
    rng = np.random.default_rng(100)
    worst, hits = 0.0, 0
    for _ in range(200):
        T = int(rng.integers(1, 7))
        em = rng.normal(scale=2.0, size=(T, 4))
        tr = random_transitions(rng)
        seqs = all_legal(T)
        scores = np.array([path_score(em, q, tr) for q in seqs])
        log_z = np.log(np.sum(np.exp(scores - scores.max()))) + scores.max()
        gold = seqs[int(rng.integers(len(seqs)))]
        worst = max(worst, abs(crf_neg_log_likelihood(em, gold, tr) - (log_z - path_score(em, gold, tr))))
        hits += tuple(viterbi_batch(em[None], [T], tr)[0]) == seqs[int(np.argmax(scores))]
    elapsed = time.time() - start
    verdict("criterion 2 CRF exactness", worst <= 1e-8 and hits == 200 and elapsed <= 30,
            f"max NLL err {worst:.1e}, viterbi {hits}/200, {elapsed:.1f}s")


def test_criterion_3_normalization(verdict):
    rng = np.random.default_rng(101)
    worst = 0.0
    for T in range(1, 6):
        for _ in range(5):
            em = rng.normal(size=(T, 4))
            tr = random_transitions(rng)
            total = sum(np.exp(-crf_neg_log_likelihood(em, q, tr)) for q in all_legal(T))
            worst = max(worst, abs(total - 1.0))
    verdict("criterion 3 probability normalization", worst <= 1e-8, f"max |sum - 1| {worst:.1e}")


def test_criterion_4_poincare_hierarchy(verdict):
    start = time.time()
    tree = binary_tree(3)
    table = train_poincare(tree, dim=5, epochs=300, lr=0.3, seed=0)
    anc = {n: set(tree.ancestors(n)) for n in tree.order}
    edge = np.mean([table.distance(p, c) for p, c in tree.edges()])
    other = np.mean([table.distance(a, b) for i, a in enumerate(tree.order) for b in tree.order[i + 1:]
                     if a not in anc[b] and b not in anc[a]])
    norm = {n: float(np.linalg.norm(table[n])) for n in tree.order}
    leaf = np.mean([norm[n] for n in tree.leaves()])
    level1 = np.mean([norm[n] for n in tree.order if tree.level[n] == 1])
    elapsed = time.time() - start
    verdict("criterion 4 Poincare hierarchy", len(tree) == 15 and edge < other and leaf > level1 and elapsed <= 120,
            f"edge {edge:.3f} < other {other:.3f}; leaf norm {leaf:.3f} > level-1 norm {level1:.3f}; {elapsed:.1f}s")


def test_criterion_5_loss_identities(verdict, beer_tree):
    tree, records, _ = synth.generate(seed=2, n_products=60)
    emb = train_poincare(tree, dim=6, epochs=20, seed=0)
    base = ModelConfig(mode="cond-self-att", word_dim=10, hidden=8, cat_dim=6, att_dim=6, pool_dim=6,
                       max_epochs=2, batch_size=16, seed=5)
    a, b = [], []
    off = train(base.replace(multitask="off"), records[:45], records[45:], tree, emb, "flavor", on_step=a.append)
    one = train(base.replace(multitask="hier", gamma=1.0), records[:45], records[45:], tree, emb, "flavor",
                on_step=b.append)
    same = a == b and all(np.array_equal(off.model.store[n], one.model.store[n]) for n in off.model.store.names())
    rng = np.random.default_rng(3)
    worst = 0.0
    for leaf in beer_tree.label_nodes:
        t = hierarchical_targets(beer_tree, leaf, w=1.0)
        p = rng.uniform(0.01, 0.99, size=len(t.labels))
        oracle = -sum(y * np.log(q) + (1 - y) * np.log(1 - q) for q, y in zip(p, t.labels))
        worst = max(worst, abs(category_loss(p, t.labels, t.weights) - oracle))
    verdict("criterion 5 loss identities", same and worst <= 1e-10,
            f"gamma=1 vs off identical over {len(a)} steps: {same}; w=1 BCE err {worst:.1e}")


def test_criterion_6_evaluation_rule(verdict):
    a = judge(["v1", "v2", "v3"], ["v1"])
    b = judge(["v1"], ["v1", "v2"])
    verdict("criterion 6 evaluation rule fidelity", a == WRONG and b == MATCHED, f"extra-values case {a}, partial case {b}")


CONFIGS = [("none", "off"), ("cond-self-att", "off"), ("cond-self-att", "hier"), ("none", "hier"),
           ("cond-self-att", "flat")]


@pytest.fixture(scope="module")
def ablation_runs():
    """Train every configuration needed by criteria 7 and 8 on the seeded 2000-product corpus."""
    start = time.time()
    tree, records, lexicon = synth.generate(seed=0, n_products=2000)
    train_set, val_set, test_set = split_dataset(records, seed=0)
    emb = train_poincare(tree, dim=50, epochs=200, seed=0)
    ambiguous = [r for r in test_set if synth.is_ambiguous(r, lexicon)]
    inapplicable = [r for r in test_set if r.category_id in lexicon["inapplicable_categories"]]
    targets = np.stack([hierarchical_targets(tree, r.category_id).labels for r in test_set])
    results = {}
    for mode, mt in CONFIGS:
        tm = train(ModelConfig(mode=mode, multitask=mt, seed=0), train_set, val_set, tree, emb, "flavor")

        def f1(rs):
            outs = [ProductEvalOutcome(v, r.values("flavor"), r.category_id) for r, v in zip(rs, extract_values(tm, rs))]
            return extraction_metrics(outs).micro.f1

        row = {"micro": f1(test_set), "ambiguous": f1(ambiguous),
               "inapplicable": sum(1 for v in extract_values(tm, inapplicable) if v)}
        if mt != "off":
            row["category_f1"] = classification_metrics(predict_category_probs(tm, test_set), targets).f1
        results[(mode, mt)] = row
    return results, len(inapplicable), time.time() - start


def test_criterion_7a_conditioning_helps_on_ambiguous(verdict, ablation_runs):
    res, _, elapsed = ablation_runs
    gap = res[("cond-self-att", "off")]["ambiguous"] - res[("none", "off")]["ambiguous"]
    verdict("criterion 7a cond-self-att vs none on ambiguous products", gap * 100 >= 5 and elapsed <= 1800,
            f"{100 * res[('cond-self-att', 'off')]['ambiguous']:.1f} vs {100 * res[('none', 'off')]['ambiguous']:.1f} "
            f"micro-F1 (gap {100 * gap:.1f} points, need >= 5); corpus runtime {elapsed:.0f}s")


def test_criterion_7b_hierarchical_beats_flat(verdict, ablation_runs):
    res, _, _ = ablation_runs
    hier, flat = res[("cond-self-att", "hier")]["category_f1"], res[("cond-self-att", "flat")]["category_f1"]
    verdict("criterion 7b MT-hier vs MT-flat category F1", hier >= flat, f"{100 * hier:.1f} vs {100 * flat:.1f}")


def test_criterion_7c_full_model_beats_ablations(verdict, ablation_runs):
    res, _, _ = ablation_runs
    full = res[("cond-self-att", "hier")]["micro"]
    no_mt = res[("cond-self-att", "off")]["micro"]
    no_cond = res[("none", "hier")]["micro"]
    verdict("criterion 7c full model vs its two ablations", full >= no_mt and full >= no_cond,
            f"cond-self-att+hier {100 * full:.1f}, without multitask {100 * no_mt:.1f}, "
            f"without conditioning {100 * no_cond:.1f} micro-F1")


def test_criterion_8_inapplicable_attribute(verdict, ablation_runs):
    res, n, _ = ablation_runs
    cond, plain = res[("cond-self-att", "off")]["inapplicable"], res[("none", "off")]["inapplicable"]
    verdict("criterion 8 attribute applicability", cond <= plain / 2,
            f"products with extractions out of {n}: cond-self-att {cond}, none {plain}")


def _run_pipeline(root):
    """Every command once, with small settings; returns captured stdout per command."""
    cfg = root / "cfg.ini"
    from taxoextract.model import write_config
    write_config(ModelConfig(mode="cond-self-att", multitask="hier", word_dim=12, hidden=8, cat_dim=6, att_dim=6,
                             pool_dim=6, max_epochs=2, seed=1), cfg)
    d = root / "corpus"
    steps = [
        ["synth", "--seed", "3", "--out", str(d), "--products", "150"],
        ["taxonomy-embed", "--taxonomy", str(d / "taxonomy.jsonl"), "--out", str(root / "emb.txt"), "--dim", "6",
         "--epochs", "30"],
        ["train", "--config", str(cfg), "--products", str(d / "products.jsonl"), "--taxonomy",
         str(d / "taxonomy.jsonl"), "--embeddings", str(root / "emb.txt"), "--attribute", "flavor", "--out",
         str(root / "m.ckpt")],
        ["extract", "--ckpt", str(root / "m.ckpt"), "--products", str(d / "products.jsonl"), "--out",
         str(root / "pred.jsonl")],
        ["evaluate", "--predictions", str(root / "pred.jsonl"), "--gold", str(d / "products.jsonl"), "--out",
         str(root / "report.json"), "--attribute", "flavor"],
    ]
    codes = [cli_main(argv) for argv in steps]
    assert codes == [0] * len(steps)


def _snapshot(root):
    files = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        data = path.read_bytes()
        if path.name.endswith(".log.jsonl"):
            # wall-clock timestamps are the one field allowed to differ
            rows = [json.loads(line) for line in data.decode().splitlines()]
            data = json.dumps([{k: v for k, v in r.items() if k != "timestamp"} for r in rows]).encode()
        files[str(path.relative_to(root))] = data
    return files


def test_criterion_9_determinism(verdict, tmp_path, capsys):
    snaps = []
    for k in range(2):
        root = tmp_path / f"run{k}"
        root.mkdir()
        _run_pipeline(root)
        snaps.append(_snapshot(root))
    out = capsys.readouterr().out.replace(str(tmp_path / "run0"), "R").replace(str(tmp_path / "run1"), "R")
    half = len(out) // 2
    differing = sorted(k for k in snaps[0] if snaps[0][k] != snaps[1].get(k))
    ok = not differing and set(snaps[0]) == set(snaps[1]) and out[:half] == out[half:]
    verdict("criterion 9 determinism", ok,
            f"{len(snaps[0])} output files compared byte for byte across two runs; differing {differing or 'none'}")
