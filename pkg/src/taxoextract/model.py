"""BiLSTM-CRF tagger conditioned on category embeddings, with a category head.

The conditioning variants share one product encoder:

* ``none``: plain BiLSTM-CRF
* ``prefix-id`` / ``prefix-name`` / ``prefix-path``: category tokens prepended to the text
* ``concat-wemb`` / ``concat-lstm``: category vector appended to word or BiLSTM features
* ``gate``: ``h_t * sigmoid(W4 h_t + W5 e_c)``
* ``cond-self-att``: pairwise sigmoid attention scored with the category vector

``multitask`` adds attention pooling and a sigmoid classifier over taxonomy
nodes trained with flat or hierarchical targets.
"""
from __future__ import annotations

import configparser
import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import DESC_TOKEN, ProductRecord, TokenizedText, label_distant, product_text, tokenize
from .crf import NUM_TAGS, crf_nll, init_transitions, tags_to_ids, viterbi_batch
from .diffcore import (PAD_ID, UNK_ID, BiLSTM, Dense, Embedding, ParameterStore, dropout,
                       masked_softmax, sigmoid)
from .taxonomy import CategoryEmbeddingTable, TaxonomyTree, ancestor_path, flat_targets, hierarchical_targets

logger = logging.getLogger(__name__)

MODES = ("none", "prefix-id", "prefix-name", "prefix-path", "concat-wemb", "concat-lstm",
         "gate", "cond-self-att")
EMBEDDING_MODES = ("concat-wemb", "concat-lstm", "gate", "cond-self-att")
MULTITASK = ("off", "flat", "hier")
SEP, SEP2 = "<SEP>", "<SEP2>"
PROB_CLIP = 1e-12


@dataclass
class ModelConfig:
    mode: str = "cond-self-att"
    geometry: str = "poincare"
    multitask: str = "hier"
    gamma: float = 0.5
    w: float = 1.0
    dropout: float = 0.4
    word_dim: int = 100
    hidden: int = 100
    cat_dim: int = 50
    att_dim: int = 50
    pool_dim: int = 50
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 3
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    fields: str = "title"
    fallback: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown conditioning mode {self.mode!r}; choose from {MODES}")
        if self.multitask not in MULTITASK:
            raise ValueError(f"multitask must be one of {MULTITASK}")
        if self.geometry not in ("poincare", "euclidean"):
            raise ValueError("geometry must be 'poincare' or 'euclidean'")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.w <= 1.0:
            raise ValueError("w must lie in (0, 1]")

    @property
    def d(self) -> int:
        return 2 * self.hidden

    @property
    def uses_category_embedding(self) -> bool:
        return self.mode in EMBEDDING_MODES

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path) -> ModelConfig:
    """Read ``key = value`` lines (``#`` comments allowed); omitted keys keep their defaults."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[model]\n" + text)
    types = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    values = {}
    for key, raw in parser["model"].items():
        key = key.replace("-", "_")
        if key not in types:
            raise ValueError(f"{path}: unknown config key {key!r}")
        kind = types[key]
        if kind in ("bool", bool):
            values[key] = parser["model"].getboolean(key)
        elif kind in ("int", int):
            values[key] = int(raw)
        elif kind in ("float", float):
            values[key] = float(raw)
        else:
            values[key] = raw.strip()
    return ModelConfig(**values)


def write_config(config: ModelConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in config.to_dict().items():
            fh.write(f"{key} = {value}\n")


# -- vocabulary and inputs -----------------------------------------------------

class Vocabulary:
    SPECIALS = ("<PAD>", "<UNK>", SEP, SEP2, DESC_TOKEN)

    def __init__(self, tokens: Sequence[str]):
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        assert self.stoi["<PAD>"] == PAD_ID and self.stoi["<UNK>"] == UNK_ID

    @classmethod
    def build(cls, sequences, min_count: int = 1) -> "Vocabulary":
        counts = Counter(tok for seq in sequences for tok in seq)
        words = sorted(t for t, c in counts.items() if c >= min_count and t not in cls.SPECIALS)
        return cls(list(cls.SPECIALS) + words)

    def __len__(self) -> int:
        return len(self.itos)

    def ids(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def to_json(self) -> list[str]:
        return list(self.itos)


def prefix_tokens(tokens: Sequence[str], category: str, variant: str, tree: TaxonomyTree | None = None
                  ) -> list[str]:
    """Prepend category tokens and ``<SEP>``.

    ``id`` uses the node id, ``name`` the tokenized node name and ``path``
    the names from the top of the tree down to the node separated by
    ``<SEP2>``.
    """
    if variant == "id":
        head = [category.lower()]
    elif variant == "name":
        name = tree.name(category) if tree is not None and category in tree else category
        head = list(tokenize(name).normalized)
    elif variant == "path":
        if tree is None or category not in tree:
            head = [category.lower()]
        else:
            head = []
            for k, node in enumerate(reversed(ancestor_path(tree, category))):
                if k:
                    head.append(SEP2)
                head.extend(tokenize(tree.name(node)).normalized)
    else:
        raise ValueError(f"unknown prefix variant {variant!r}")
    return head + [SEP] + list(tokens)


@dataclass
class Example:
    record_id: str
    text: TokenizedText
    token_ids: list[int]
    offset: int
    category_id: str
    category_row: int
    tag_ids: np.ndarray | None
    targets: np.ndarray
    weights: np.ndarray


@dataclass
class Batch:
    ids: np.ndarray
    mask: np.ndarray
    offsets: np.ndarray
    tag_ids: np.ndarray
    tag_lengths: np.ndarray
    category_rows: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    examples: list

    def __len__(self) -> int:
        return len(self.examples)


def model_tokens(record: ProductRecord, config: ModelConfig, tree: TaxonomyTree | None):
    text = product_text(record, config.fields)
    tokens = list(text.normalized)
    offset = 0
    if config.mode.startswith("prefix-"):
        full = prefix_tokens(tokens, record.category_id, config.mode.split("-", 1)[1], tree)
        offset = len(full) - len(tokens)
        tokens = full
    return text, tokens, offset


class MissingCategoryEmbedding(KeyError):
    pass


def encode(records: Sequence[ProductRecord], vocab: Vocabulary, config: ModelConfig,
           tree: TaxonomyTree, category_index: dict[str, int] | None,
           attribute: str | None = None) -> list[Example]:
    """Turn records into model inputs.

    When ``attribute`` is given, BIOE tags come from distant supervision of
    the record's gold values; records with no text tokens are dropped.
    """
    out = []
    num_labels = len(tree.label_nodes)
    for rec in records:
        text, tokens, offset = model_tokens(rec, config, tree)
        if len(text) == 0 and attribute is not None:
            continue
        row = -1
        if config.uses_category_embedding:
            if category_index is not None and rec.category_id in category_index:
                row = category_index[rec.category_id]
            elif not config.fallback:
                raise MissingCategoryEmbedding(f"no category embedding for node {rec.category_id!r}")
        tag_ids = None
        if attribute is not None:
            tag_ids = tags_to_ids(label_distant(text, rec.values(attribute)))
        if config.multitask != "off" and rec.category_id in tree and rec.category_id != tree.root:
            tgt = (hierarchical_targets(tree, rec.category_id, config.w) if config.multitask == "hier"
                   else flat_targets(tree, rec.category_id))
            targets, weights = tgt.labels, tgt.weights
        else:
            targets, weights = np.zeros(num_labels), np.zeros(num_labels)
        out.append(Example(rec.id, text, vocab.ids(tokens), offset, rec.category_id, row, tag_ids,
                           targets, weights))
    return out


def collate(examples: Sequence[Example]) -> Batch:
    B = len(examples)
    T = max([len(e.token_ids) for e in examples] + [1])
    Tt = max([len(e.text) for e in examples] + [1])
    ids = np.full((B, T), PAD_ID, dtype=np.int64)
    mask = np.zeros((B, T), dtype=bool)
    tag_ids = np.full((B, Tt), 2, dtype=np.int64)
    for b, ex in enumerate(examples):
        n = len(ex.token_ids)
        ids[b, :n] = ex.token_ids
        mask[b, :n] = True
        if ex.tag_ids is not None:
            tag_ids[b, :len(ex.tag_ids)] = ex.tag_ids
    return Batch(
        ids=ids, mask=mask,
        offsets=np.array([e.offset for e in examples], dtype=np.int64),
        tag_ids=tag_ids,
        tag_lengths=np.array([len(e.text) for e in examples], dtype=np.int64),
        category_rows=np.array([e.category_row for e in examples], dtype=np.int64),
        targets=np.stack([e.targets for e in examples]) if B else np.zeros((0, 0)),
        weights=np.stack([e.weights for e in examples]) if B else np.zeros((0, 0)),
        examples=list(examples),
    )


# -- conditioning and heads (functional form) ----------------------------------

def cond_self_att(H, ec, mask, W1, W2, W3, b_g, w_alpha, b_alpha):
    """Category-conditioned pairwise sigmoid self-attention.

    ``g[t, s] = tanh(W1 h_t + W2 h_s + W3 e_c + b_g)``,
    ``alpha[t, s] = sigmoid(w_alpha . g[t, s] + b_alpha)`` and
    ``out_t = sum_s alpha[t, s] h_s``. Weights are not normalised over s;
    pairs touching a masked position get weight 0.

    Returns ``(out, alpha, cache)``.
    """
    if H.shape[1] == 0:
        raise ValueError("conditional self-attention needs at least one token")
    A = H @ W1.T
    Bm = H @ W2.T
    c = ec @ W3.T + b_g
    G = np.tanh(A[:, :, None, :] + Bm[:, None, :, :] + c[:, None, None, :])
    S = G @ w_alpha + b_alpha[0]
    pair = (mask[:, :, None] & mask[:, None, :]).astype(np.float64)
    sig = sigmoid(S)
    alpha = sig * pair
    out = alpha @ H
    return out, alpha, (H, ec, G, sig, pair, alpha)


def cond_self_att_backward(dout, cache, W1, W2, W3, w_alpha):
    H, ec, G, sig, pair, alpha = cache
    dalpha = dout @ H.transpose(0, 2, 1)
    dH = alpha.transpose(0, 2, 1) @ dout
    dS = dalpha * sig * (1 - sig) * pair
    grads = {
        "w_alpha": np.einsum("btsp,bts->p", G, dS),
        "b_alpha": np.array([dS.sum()]),
    }
    dpre = dS[..., None] * w_alpha * (1 - G * G)
    dA = dpre.sum(axis=2)
    dB = dpre.sum(axis=1)
    dc = dpre.sum(axis=(1, 2))
    d = H.shape[-1]
    grads["W1"] = dA.reshape(-1, dA.shape[-1]).T @ H.reshape(-1, d)
    grads["W2"] = dB.reshape(-1, dB.shape[-1]).T @ H.reshape(-1, d)
    grads["W3"] = dc.T @ ec
    grads["b_g"] = dc.sum(axis=0)
    dH += dA @ W1 + dB @ W2
    return dH, grads


def gate_condition(H, ec, W4, W5):
    """``h_t * sigmoid(W4 h_t + W5 e_c)``; returns ``(out, cache)``."""
    s = sigmoid(H @ W4.T + (ec @ W5.T)[:, None, :])
    return H * s, (H, ec, s)


def gate_condition_backward(dout, cache, W4, W5):
    H, ec, s = cache
    dz = dout * H * s * (1 - s)
    d = H.shape[-1]
    grads = {
        "W4": dz.reshape(-1, dz.shape[-1]).T @ H.reshape(-1, d),
        "W5": dz.sum(axis=1).T @ ec,
    }
    return dout * s + dz @ W4, grads


def concat_condition(X, ec, mask):
    """Append ``e_c`` to every unmasked position of ``X``."""
    tiled = np.broadcast_to(ec[:, None, :], X.shape[:2] + (ec.shape[-1],)) * mask[..., None]
    return np.concatenate([X, tiled], axis=-1)


def attention_pool(H, mask, W_c, b_c, u_c):
    """Softmax-attention pooling over unmasked positions; returns ``(h, beta, cache)``."""
    if H.shape[1] == 0 or not np.all(mask.any(axis=1)):
        raise ValueError("attention pooling needs at least one unmasked token per product")
    U = np.tanh(H @ W_c.T + b_c)
    scores = U @ u_c
    beta = masked_softmax(scores, mask, axis=1)
    h = np.einsum("bt,btd->bd", beta, H)
    return h, beta, (H, U, beta)


def attention_pool_backward(dh, cache, W_c, u_c):
    H, U, beta = cache
    dbeta = np.einsum("btd,bd->bt", H, dh)
    dH = beta[..., None] * dh[:, None, :]
    ds = beta * (dbeta - np.sum(beta * dbeta, axis=1, keepdims=True))
    grads = {"u_c": np.einsum("btq,bt->q", U, ds)}
    dpre = ds[..., None] * u_c * (1 - U * U)
    grads["W_c"] = dpre.reshape(-1, dpre.shape[-1]).T @ H.reshape(-1, H.shape[-1])
    grads["b_c"] = dpre.reshape(-1, dpre.shape[-1]).sum(axis=0)
    dH += dpre @ W_c
    return dH, grads


def category_probs(h, W_d, b_d):
    """Independent sigmoid probability per taxonomy node."""
    return sigmoid(h @ W_d.T + b_d)


def category_loss(p, labels, weights):
    """Weighted binary cross-entropy, summed over nodes (last axis).

    Probabilities are clipped to ``[1e-12, 1 - 1e-12]`` before the logs.
    """
    pc = np.clip(p, PROB_CLIP, 1 - PROB_CLIP)
    return -np.sum(weights * (labels * np.log(pc) + (1 - labels) * np.log(1 - pc)), axis=-1)


def category_loss_grad_logits(p, labels, weights):
    """Gradient of :func:`category_loss` w.r.t. the pre-sigmoid logits."""
    live = (p > PROB_CLIP) & (p < 1 - PROB_CLIP)
    return weights * (p - labels) * live


def multitask_loss(extraction_loss, category_loss_value, gamma):
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return gamma * extraction_loss + (1 - gamma) * category_loss_value


# -- the model -------------------------------------------------------------------

@dataclass
class LossParts:
    total: float
    extraction: float
    category: float


class TaxonomyTagger:
    """Attribute value tagger for one attribute across a product taxonomy.

    Parameters
    ----------
    config : ModelConfig
    vocab_size : int
        Rows of the word embedding table.
    num_labels : int
        Taxonomy size minus the root (classifier outputs).
    category_table : array, optional
        Frozen category embeddings, one row per taxonomy node; required by
        modes that condition on ``e_c``.
    """

    def __init__(self, config: ModelConfig, vocab_size: int, num_labels: int,
                 category_table: np.ndarray | None = None, store: ParameterStore | None = None):
        self.config = config
        self.num_labels = num_labels
        self.store = store if store is not None else ParameterStore(config.seed)
        self.fallback_count = 0
        s = self.store
        cfg = config
        m = cfg.cat_dim
        if cfg.uses_category_embedding:
            if category_table is None and "category.table" not in s:
                raise ValueError(f"mode {cfg.mode!r} needs category embeddings")
            if "category.table" not in s:
                category_table = np.asarray(category_table, dtype=np.float64)
                if category_table.shape[1] != m:
                    raise ValueError(f"category embeddings have dim {category_table.shape[1]}, config cat_dim={m}")
                s.add("category.table", category_table, frozen=True)
        self.embed = Embedding(s, "embed.words", vocab_size, cfg.word_dim)
        in_dim = cfg.word_dim + (m if cfg.mode == "concat-wemb" else 0)
        self.encoder = BiLSTM(s, "encoder", in_dim, cfg.hidden)
        d = cfg.d
        self.emit = Dense(s, "emit", d + (m if cfg.mode == "concat-lstm" else 0), NUM_TAGS)
        if "crf.transitions" not in s:
            s.add("crf.transitions", init_transitions())
        p = cfg.att_dim
        if cfg.mode == "cond-self-att" and "att.W1" not in s:
            s.glorot("att.W1", (p, d))
            s.glorot("att.W2", (p, d))
            s.glorot("att.W3", (p, m))
            s.zeros("att.b_g", (p,))
            s.uniform("att.w_alpha", (p,), np.sqrt(6.0 / (p + 1)))
            s.zeros("att.b_alpha", (1,))
        if cfg.mode == "gate" and "gate.W4" not in s:
            s.glorot("gate.W4", (d, d))
            s.glorot("gate.W5", (d, m))
        if cfg.multitask != "off" and "pool.W_c" not in s:
            q = cfg.pool_dim
            s.glorot("pool.W_c", (q, d))
            s.zeros("pool.b_c", (q,))
            s.uniform("pool.u_c", (q,), np.sqrt(6.0 / (q + 1)))
        if cfg.multitask != "off":
            self.clf = Dense(s, "clf", d, num_labels)

    # ----------------------------------------------------------------------
    def _category_vectors(self, rows):
        m = self.config.cat_dim
        if not self.config.uses_category_embedding:
            return np.zeros((len(rows), m))
        table = self.store["category.table"]
        missing = rows < 0
        self.fallback_count += int(missing.sum())
        return np.where(missing[:, None], 0.0, table[np.maximum(rows, 0)])

    def _encode(self, batch: Batch, training: bool, rng):
        cfg = self.config
        X, ids = self.embed.forward(batch.ids)
        ec = self._category_vectors(batch.category_rows)
        if cfg.mode == "concat-wemb":
            X = concat_condition(X, ec, batch.mask)
        H, lstm_cache = self.encoder.forward(X, batch.mask)
        Hd, drop = dropout(H, cfg.dropout, rng, training)
        return Hd, ec, (ids, lstm_cache, drop)

    def _condition(self, Hd, ec, mask):
        cfg, s = self.config, self.store
        if cfg.mode == "cond-self-att":
            out, _, cache = cond_self_att(Hd, ec, mask, s["att.W1"], s["att.W2"], s["att.W3"],
                                          s["att.b_g"], s["att.w_alpha"], s["att.b_alpha"])
            return out, cache
        if cfg.mode == "gate":
            return gate_condition(Hd, ec, s["gate.W4"], s["gate.W5"])
        if cfg.mode == "concat-lstm":
            return concat_condition(Hd, ec, mask), None
        return Hd, None

    def _condition_backward(self, dout, cache):
        cfg, s = self.config, self.store
        if cfg.mode == "cond-self-att":
            dH, grads = cond_self_att_backward(dout, cache, s["att.W1"], s["att.W2"], s["att.W3"],
                                               s["att.w_alpha"])
            for k, g in grads.items():
                s.grads["att." + k] += g
            return dH
        if cfg.mode == "gate":
            dH, grads = gate_condition_backward(dout, cache, s["gate.W4"], s["gate.W5"])
            for k, g in grads.items():
                s.grads["gate." + k] += g
            return dH
        if cfg.mode == "concat-lstm":
            return dout[..., :cfg.d]
        return dout

    @staticmethod
    def _tag_positions(batch: Batch, T: int):
        Tt = batch.tag_ids.shape[1]
        steps = np.arange(Tt)
        valid = steps[None, :] < batch.tag_lengths[:, None]
        pos = np.clip(batch.offsets[:, None] + steps[None, :], 0, max(T - 1, 0))
        return pos, valid

    def emissions(self, batch: Batch, training: bool = False, rng=None):
        """Tag scores over the text positions, shape (B, Tt, 4)."""
        Hd, ec, _ = self._encode(batch, training, rng)
        Ht, _ = self._condition(Hd, ec, batch.mask)
        em_full, _ = self.emit.forward(Ht)
        pos, valid = self._tag_positions(batch, em_full.shape[1])
        rows = np.arange(len(batch))[:, None]
        return em_full[rows, pos] * valid[..., None]

    def forward_backward(self, batch: Batch, training: bool = True, rng=None,
                         compute_grad: bool = True) -> LossParts:
        """Batch-mean loss; when ``compute_grad`` the gradients are added to the store."""
        cfg, s = self.config, self.store
        B = len(batch)
        Hd, ec, enc_cache = self._encode(batch, training, rng)
        Ht, cond_cache = self._condition(Hd, ec, batch.mask)
        em_full, emit_cache = self.emit.forward(Ht)
        pos, valid = self._tag_positions(batch, em_full.shape[1])
        rows = np.arange(B)[:, None]
        em = em_full[rows, pos] * valid[..., None]
        nll, d_em, d_tr = crf_nll(em, batch.tag_ids, batch.tag_lengths, s["crf.transitions"],
                                  need_grad=compute_grad)
        loss_a = float(nll.mean())
        multitask = cfg.multitask != "off"
        loss_b = 0.0
        if multitask:
            h, _, pool_cache = attention_pool(Hd, batch.mask, s["pool.W_c"], s["pool.b_c"], s["pool.u_c"])
            logits, clf_cache = self.clf.forward(h)
            probs = sigmoid(logits)
            loss_b = float(category_loss(probs, batch.targets, batch.weights).mean())
            total = multitask_loss(loss_a, loss_b, cfg.gamma)
            coef_a = cfg.gamma
        else:
            total = loss_a
            coef_a = 1.0
        if not compute_grad:
            return LossParts(total, loss_a, loss_b)

        s.grads["crf.transitions"] += coef_a / B * d_tr
        d_em_full = np.zeros_like(em_full)
        np.add.at(d_em_full, (np.broadcast_to(rows, pos.shape), pos), (coef_a / B) * d_em * valid[..., None])
        dHt = self.emit.backward(d_em_full, emit_cache)
        dHd = self._condition_backward(dHt, cond_cache)
        if multitask:
            dlogits = (1 - cfg.gamma) / B * category_loss_grad_logits(probs, batch.targets, batch.weights)
            dh = self.clf.backward(dlogits, clf_cache)
            dHp, grads = attention_pool_backward(dh, pool_cache, s["pool.W_c"], s["pool.u_c"])
            for k, g in grads.items():
                s.grads["pool." + k] += g
            dHd = dHd + dHp
        ids, lstm_cache, drop = enc_cache
        dH = dHd if drop is None else dHd * drop
        dX = self.encoder.backward(dH, lstm_cache)
        self.embed.backward(dX[..., :cfg.word_dim], ids)
        return LossParts(total, loss_a, loss_b)

    def loss(self, batch: Batch, training: bool = False, rng=None) -> LossParts:
        return self.forward_backward(batch, training, rng, compute_grad=False)

    def decode(self, batch: Batch) -> list[list[str]]:
        """Viterbi tags for the text tokens of each product (prefix positions excluded)."""
        from .crf import ids_to_tags

        em = self.emissions(batch)
        paths = viterbi_batch(em, batch.tag_lengths, self.store["crf.transitions"])
        return [ids_to_tags(p) for p in paths]

    def predict_categories(self, batch: Batch) -> np.ndarray:
        if self.config.multitask == "off":
            raise ValueError("model was trained without a category head")
        s = self.store
        Hd, _, _ = self._encode(batch, False, None)
        h, _, _ = attention_pool(Hd, batch.mask, s["pool.W_c"], s["pool.b_c"], s["pool.u_c"])
        return category_probs(h, s["clf.W"], s["clf.b"])


def category_lookup(tree: TaxonomyTree, table: CategoryEmbeddingTable | None):
    """Map node id -> row of the frozen table, plus the table matrix itself (nodes in tree order)."""
    if table is None:
        return None, None
    nodes = [n for n in tree.order if n in table]
    missing = [n for n in tree.order if n not in table]
    if missing:
        logger.warning("%d taxonomy nodes have no embedding (e.g. %s)", len(missing), missing[:3])
    matrix = np.stack([table[n] for n in nodes]) if nodes else np.zeros((0, table.dim))
    return {n: i for i, n in enumerate(nodes)}, matrix


def save_meta(path, config: ModelConfig, vocab: Vocabulary, tree: TaxonomyTree,
              category_index: dict[str, int] | None, attribute: str) -> None:
    meta = {
        "config": config.to_dict(),
        "vocab": vocab.to_json(),
        "taxonomy": [{"id": n, "parent": tree.parent[n], "name": tree.names.get(n)} for n in tree.order],
        "category_index": category_index,
        "attribute": attribute,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
