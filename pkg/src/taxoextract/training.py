"""Mini-batch multi-task training with Adam and early stopping."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import ProductRecord
from .diffcore import ParameterStore, save_tensors
from .model import (ModelConfig, TaxonomyTagger, Vocabulary, category_lookup, collate, encode,
                    model_tokens, save_meta)
from .taxonomy import CategoryEmbeddingTable, TaxonomyTree

logger = logging.getLogger(__name__)

# Independent RNG streams, keyed off the config seed.
SHUFFLE_STREAM, DROPOUT_STREAM = 1, 2


class TrainingAborted(RuntimeError):
    pass


def make_batches(items: Sequence, batch_size: int = 32, seed: int | None = 0) -> list[list]:
    """Shuffle (unless ``seed`` is None) and chunk; the last batch may be short."""
    if len(items) == 0:
        raise ValueError("cannot batch an empty dataset")
    order = np.arange(len(items)) if seed is None else np.random.default_rng(seed).permutation(len(items))
    return [[items[i] for i in order[k:k + batch_size]] for k in range(0, len(items), batch_size)]


class Adam:
    def __init__(self, store: ParameterStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.names = store.trainable()
        self.m = {n: np.zeros_like(store[n]) for n in self.names}
        self.v = {n: np.zeros_like(store[n]) for n in self.names}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for n in self.names:
            g = self.store.grads[n]
            self.m[n] = self.beta1 * self.m[n] + (1 - self.beta1) * g
            self.v[n] = self.beta2 * self.v[n] + (1 - self.beta2) * g * g
            self.store.values[n] -= self.lr * (self.m[n] / c1) / (np.sqrt(self.v[n] / c2) + self.eps)


def clip_gradients(store: ParameterStore, max_norm: float) -> float:
    names = store.trainable()
    norm = float(np.sqrt(sum(float(np.sum(store.grads[n] ** 2)) for n in names)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for n in names:
            store.grads[n] *= scale
    return norm


@dataclass
class TrainState:
    epoch: int = 0
    best_val: float = float("inf")
    best_epoch: int = -1
    patience: int = 0
    history: list = field(default_factory=list)


@dataclass
class TrainedModel:
    model: TaxonomyTagger
    vocab: Vocabulary
    tree: TaxonomyTree
    category_index: dict | None
    attribute: str
    state: TrainState

    @property
    def config(self) -> ModelConfig:
        return self.model.config

    def save(self, path) -> None:
        save_tensors(path, self.model.store.values)
        save_meta(str(path) + ".meta.json", self.config, self.vocab, self.tree, self.category_index,
                  self.attribute)


def evaluate_loss(model: TaxonomyTagger, examples, batch_size: int) -> tuple[float, float, float]:
    """Product-weighted mean (total, extraction, category) loss in inference mode."""
    totals = np.zeros(3)
    for chunk in make_batches(examples, batch_size, seed=None):
        parts = model.loss(collate(chunk))
        totals += len(chunk) * np.array([parts.total, parts.extraction, parts.category])
    return tuple(float(x) for x in totals / len(examples))


def build_vocabulary(records, config: ModelConfig, tree: TaxonomyTree) -> Vocabulary:
    return Vocabulary.build(model_tokens(r, config, tree)[1] for r in records)


def train(config: ModelConfig, train_records: Sequence[ProductRecord], val_records: Sequence[ProductRecord],
          tree: TaxonomyTree, embeddings: CategoryEmbeddingTable | None, attribute: str,
          log_path=None, on_step=None) -> TrainedModel:
    """Fit one tagger; the parameters with the lowest validation loss are kept.

    Stops after ``config.max_epochs`` epochs or after ``config.patience``
    consecutive epochs without a validation improvement. ``on_step`` is
    called with the training loss of every batch.
    """
    if config.uses_category_embedding and embeddings is None:
        raise ValueError(f"mode {config.mode!r} needs category embeddings")
    if embeddings is not None and config.uses_category_embedding and embeddings.dim != config.cat_dim:
        raise ValueError(f"embeddings have dim {embeddings.dim} but cat_dim={config.cat_dim}")
    vocab = build_vocabulary(train_records, config, tree)
    cat_index, table = category_lookup(tree, embeddings if config.uses_category_embedding else None)
    train_ex = encode(train_records, vocab, config, tree, cat_index, attribute)
    val_ex = encode(val_records, vocab, config, tree, cat_index, attribute)
    if not train_ex:
        raise ValueError("no trainable products")
    model = TaxonomyTagger(config, len(vocab), len(tree.label_nodes), table)
    opt = Adam(model.store, config.lr, config.beta1, config.beta2, config.adam_eps)
    state = TrainState()
    best = model.store.state()
    log = open(log_path, "w", encoding="utf-8") if log_path else None
    started = time.time()
    try:
        for epoch in range(config.max_epochs):
            state.epoch = epoch
            dropout_rng = np.random.default_rng([config.seed, DROPOUT_STREAM, epoch])
            batches = make_batches(train_ex, config.batch_size, seed=hash_seed(config.seed, SHUFFLE_STREAM, epoch))
            run = np.zeros(3)
            for k, chunk in enumerate(batches):
                model.store.zero_grad()
                parts = model.forward_backward(collate(chunk), True, dropout_rng)
                if not np.isfinite(parts.total):
                    raise TrainingAborted(f"non-finite loss at epoch {epoch}, batch {k} "
                                          f"(products {[e.record_id for e in chunk[:5]]})")
                clip_gradients(model.store, config.clip_norm)
                opt.step()
                run += len(chunk) * np.array([parts.total, parts.extraction, parts.category])
                if on_step is not None:
                    on_step(parts.total)
            run /= len(train_ex)
            val = evaluate_loss(model, val_ex, config.batch_size) if val_ex else tuple(run)
            row = {"epoch": epoch, "train_loss": float(run[0]), "train_extraction": float(run[1]),
                   "train_category": float(run[2]), "val_loss": val[0], "val_extraction": val[1],
                   "val_category": val[2]}
            state.history.append(row)
            if log:
                log.write(json.dumps({**row, "timestamp": time.time()}) + "\n")
                log.flush()
            logger.info("epoch %d train %.4f val %.4f (%.1fs)", epoch, run[0], val[0], time.time() - started)
            if val[0] < state.best_val:
                state.best_val, state.best_epoch, state.patience = val[0], epoch, 0
                best = model.store.state()
            else:
                state.patience += 1
                if state.patience >= config.patience:
                    break
    finally:
        if log:
            log.close()
    model.store.load_state(best)
    return TrainedModel(model, vocab, tree, cat_index, attribute, state)


def hash_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def load_trained(path) -> TrainedModel:
    """Inverse of :meth:`TrainedModel.save`."""
    from .diffcore import load_tensors
    from .model import ModelConfig

    with open(str(path) + ".meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    config = ModelConfig(**meta["config"])
    tree = TaxonomyTree.from_parents([(r["id"], r["parent"]) for r in meta["taxonomy"]],
                                     {r["id"]: r["name"] for r in meta["taxonomy"] if r.get("name")})
    vocab = Vocabulary(meta["vocab"])
    tensors = load_tensors(path)
    store = ParameterStore(config.seed)
    for name, value in tensors.items():
        store.add(name, value, frozen=(name == "category.table"))
    model = TaxonomyTagger(config, len(vocab), len(tree.label_nodes), store=store)
    return TrainedModel(model, vocab, tree, meta["category_index"], meta["attribute"], TrainState())


def extract_values(trained: TrainedModel, records: Sequence[ProductRecord], batch_size: int = 64
                   ) -> list[list[str]]:
    """Decoded attribute values (surface strings) for each record, in input order."""
    from .crf import extract_spans

    examples = encode(records, trained.vocab, trained.config, trained.tree, trained.category_index)
    out = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        for ex, tags in zip(chunk, trained.model.decode(collate(chunk))):
            out.append(extract_spans(ex.text, tags))
    return out


def predict_category_probs(trained: TrainedModel, records: Sequence[ProductRecord], batch_size: int = 64
                           ) -> np.ndarray:
    examples = encode(records, trained.vocab, trained.config, trained.tree, trained.category_index)
    rows = [trained.model.predict_categories(collate(examples[k:k + batch_size]))
            for k in range(0, len(examples), batch_size)]
    return np.concatenate(rows) if rows else np.zeros((0, len(trained.tree.label_nodes)))
