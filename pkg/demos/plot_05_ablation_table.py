"""
Ablation table over conditioning modes and multitask settings
=============================================================

Trains one tagger per configuration on the synthetic corpus and prints
vocabulary size, coverage and micro/macro F1 on the test split. This takes
several minutes on one CPU core; lower N_PRODUCTS for a quick look.
"""

import time

import numpy as np

from taxoextract import synth
from taxoextract.corpus import split_dataset
from taxoextract.evaluation import ProductEvalOutcome, classification_metrics, extraction_metrics
from taxoextract.model import MODES, ModelConfig
from taxoextract.taxonomy import hierarchical_targets, train_poincare
from taxoextract.training import extract_values, predict_category_probs, train

N_PRODUCTS = 2000

tree, records, lexicon = synth.generate(seed=0, n_products=N_PRODUCTS)
train_set, val_set, test_set = split_dataset(records, seed=0)
emb = train_poincare(tree, dim=50, epochs=200, seed=0)
targets = np.stack([hierarchical_targets(tree, r.category_id).labels for r in test_set])

runs = [(mode, "off") for mode in MODES] + [("none", "hier"), ("cond-self-att", "flat"), ("cond-self-att", "hier")]

print(f"{'mode':15}{'multitask':10}{'Vocab':>6}{'Cov':>7}{'MiF1':>7}{'MaF1':>7}{'CatF1':>7}{'sec':>6}")
for mode, mt in runs:
    start = time.time()
    tm = train(ModelConfig(mode=mode, multitask=mt), train_set, val_set, tree, emb, "flavor")
    preds = extract_values(tm, test_set)
    rep = extraction_metrics([ProductEvalOutcome(p, r.values("flavor"), r.category_id)
                              for p, r in zip(preds, test_set)])
    cat = "" if mt == "off" else f"{100 * classification_metrics(predict_category_probs(tm, test_set), targets).f1:7.1f}"
    print(f"{mode:15}{mt:10}{rep.vocab:6d}{100 * rep.coverage:7.1f}{100 * rep.micro.f1:7.1f}"
          f"{100 * rep.macro.f1:7.1f}{cat:>7}{time.time() - start:6.0f}")
