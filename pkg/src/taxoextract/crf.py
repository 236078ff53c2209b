"""Linear-chain CRF over BIOE tags with hard transition constraints.

Tag indices are B=0, I=1, O=2, E=3; two virtual states START=4 and STOP=5
close the chain. ``transitions[i, j]`` scores moving from tag i to tag j.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import TAG_INDEX, TAGS, TokenizedText
from .diffcore import logsumexp

NUM_TAGS = 4
START, STOP = 4, 5
FORBIDDEN = -1e4

_ALLOWED = {
    START: (0, 2),
    0: (1, 3, 2, STOP),
    1: (1, 3),
    2: (0, 2, STOP),
    3: (0, 2, STOP),
}


def allowed_mask() -> np.ndarray:
    mask = np.zeros((6, 6), dtype=bool)
    for src, dsts in _ALLOWED.items():
        mask[src, list(dsts)] = True
    return mask


ALLOWED = allowed_mask()


def init_transitions() -> np.ndarray:
    return np.where(ALLOWED, 0.0, FORBIDDEN)


@dataclass
class CrfParams:
    transitions: np.ndarray

    @classmethod
    def default(cls) -> "CrfParams":
        return cls(init_transitions())

    @property
    def hard_mask(self) -> np.ndarray:
        return ~ALLOWED


def tags_to_ids(tags) -> np.ndarray:
    return np.array([TAG_INDEX[t] for t in tags], dtype=np.int64)


def ids_to_tags(ids) -> list[str]:
    return [TAGS[int(i)] for i in ids]


def is_legal_ids(ids) -> bool:
    prev = START
    for k in ids:
        if not ALLOWED[prev, k]:
            return False
        prev = int(k)
    return bool(ALLOWED[prev, STOP]) if len(ids) else True


def sequence_score(emissions, tag_ids, transitions) -> float:
    """Unnormalised score of one tag path (emissions are (T, 4))."""
    tag_ids = np.asarray(tag_ids)
    score = transitions[START, tag_ids[0]] + emissions[0, tag_ids[0]]
    for t in range(1, len(tag_ids)):
        score += transitions[tag_ids[t - 1], tag_ids[t]] + emissions[t, tag_ids[t]]
    return float(score + transitions[tag_ids[-1], STOP])


def crf_nll(emissions, tag_ids, lengths, transitions, need_grad: bool = True):
    """Per-sequence negative log-likelihood with gradients.

    Parameters
    ----------
    emissions : (B, T, 4) array
    tag_ids : (B, T) int array, gold tags; entries past each length are ignored
    lengths : (B,) int array, every length >= 1
    transitions : (6, 6) array

    Returns
    -------
    nll : (B,) array
    d_emissions : (B, T, 4) array or None
    d_transitions : (6, 6) array or None, zero on forbidden entries
    """
    emissions = np.asarray(emissions, dtype=np.float64)
    B, T, K = emissions.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    tag_ids = np.asarray(tag_ids, dtype=np.int64)
    if np.any(lengths < 1) or np.any(lengths > T):
        raise ValueError("every sequence needs 1 <= length <= T")
    for b in range(B):
        if not is_legal_ids(tag_ids[b, :lengths[b]]):
            raise ValueError(f"gold tags of sequence {b} violate the BIOE grammar: "
                             f"{ids_to_tags(tag_ids[b, :lengths[b]])}")

    trans = transitions[:K, :K]
    start = transitions[START, :K]
    stop = transitions[:K, STOP]
    steps = np.arange(T)
    valid = steps[None, :] < lengths[:, None]  # (B, T)

    alpha = np.empty((B, T, K))
    alpha[:, 0] = start + emissions[:, 0]
    for t in range(1, T):
        nxt = logsumexp(alpha[:, t - 1, :, None] + trans[None], axis=1) + emissions[:, t]
        alpha[:, t] = np.where(valid[:, t, None], nxt, alpha[:, t - 1])
    last = alpha[np.arange(B), lengths - 1]
    log_z = logsumexp(last + stop, axis=1)

    rows = np.arange(B)
    gold = np.zeros(B)
    first = tag_ids[:, 0]
    gold += start[first] + emissions[rows, 0, first]
    for t in range(1, T):
        prev, cur = tag_ids[:, t - 1], tag_ids[:, t]
        inc = trans[prev, cur] + emissions[rows, t, cur]
        gold += np.where(valid[:, t], inc, 0.0)
    gold += stop[tag_ids[rows, lengths - 1]]
    nll = log_z - gold
    if not need_grad:
        return nll, None, None

    beta = np.zeros((B, T, K))
    beta[rows, lengths - 1] = stop
    for t in range(T - 2, -1, -1):
        rec = logsumexp(trans[None] + (emissions[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
        inside = (t < lengths - 1)[:, None]
        beta[:, t] = np.where(inside, rec, beta[:, t])
    unary = np.exp(alpha + beta - log_z[:, None, None]) * valid[..., None]

    d_em = unary.copy()
    d_em[rows[:, None], steps[None, :], np.where(valid, tag_ids, 0)] -= valid
    d_tr = np.zeros((6, 6))
    d_tr[START, :K] = unary[:, 0].sum(axis=0)
    np.add.at(d_tr[START], first, -1.0)
    d_tr[:K, STOP] = unary[rows, lengths - 1].sum(axis=0)
    np.add.at(d_tr[:, STOP], tag_ids[rows, lengths - 1], -1.0)
    for t in range(1, T):
        pair = (alpha[:, t - 1, :, None] + trans[None] + (emissions[:, t] + beta[:, t])[:, None, :]
                - log_z[:, None, None])
        pair = np.exp(pair) * valid[:, t, None, None]
        d_tr[:K, :K] += pair.sum(axis=0)
        sel = valid[:, t]
        np.add.at(d_tr, (tag_ids[sel, t - 1], tag_ids[sel, t]), -1.0)
    d_tr[~ALLOWED] = 0.0
    return nll, d_em, d_tr


def crf_neg_log_likelihood(emissions, tags, transitions) -> float:
    """NLL of a single tag sequence; ``tags`` may be strings or ids."""
    emissions = np.asarray(emissions, dtype=np.float64)
    ids = tags_to_ids(tags) if len(tags) and isinstance(tags[0], str) else np.asarray(tags, dtype=np.int64)
    nll, _, _ = crf_nll(emissions[None], ids[None], [len(ids)], transitions, need_grad=False)
    return float(nll[0])


def viterbi_batch(emissions, lengths, transitions) -> list[np.ndarray]:
    """Best legal tag path per sequence; ties go to the lower tag index."""
    emissions = np.asarray(emissions, dtype=np.float64)
    B, T, K = emissions.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    trans = transitions[:K, :K]
    score = transitions[START, :K] + emissions[:, 0]
    back = np.zeros((B, T, K), dtype=np.int64)
    for t in range(1, T):
        cand = score[:, :, None] + trans[None]
        best_prev = np.argmax(cand, axis=1)
        nxt = np.take_along_axis(cand, best_prev[:, None, :], axis=1)[:, 0] + emissions[:, t]
        live = (t < lengths)[:, None]
        score = np.where(live, nxt, score)
        back[:, t] = best_prev
    final = score + transitions[:K, STOP]
    paths = []
    for b in range(B):
        n = int(lengths[b])
        if n == 0:
            paths.append(np.zeros(0, dtype=np.int64))
            continue
        path = np.empty(n, dtype=np.int64)
        path[-1] = int(np.argmax(final[b]))
        for t in range(n - 1, 0, -1):
            path[t - 1] = back[b, t, path[t]]
        paths.append(path)
    return paths


def viterbi_decode(emissions, transitions, length: int | None = None) -> list[str]:
    emissions = np.asarray(emissions, dtype=np.float64)
    n = emissions.shape[0] if length is None else length
    if n == 0:
        return []
    return ids_to_tags(viterbi_batch(emissions[None], [n], transitions)[0])


def span_positions(tags) -> list[tuple[int, int]]:
    """Half-open ``(start, end)`` token ranges of ``B I* E`` runs and lone ``B``."""
    spans = []
    start = None
    for k, tag in enumerate(tags):
        if tag == "B":
            if start is not None:
                spans.append((start, k))
            start = k
        elif tag == "I":
            continue
        elif tag == "E":
            if start is not None:
                spans.append((start, k + 1))
            start = None
        else:
            if start is not None:
                spans.append((start, k))
            start = None
    if start is not None:
        spans.append((start, len(tags)))
    return spans


def extract_spans(text: TokenizedText | list[str], tags) -> list[str]:
    """Surface strings of every tagged value, in order of appearance."""
    tokens = text.tokens if isinstance(text, TokenizedText) else list(text)
    if len(tokens) != len(tags):
        raise ValueError(f"{len(tokens)} tokens but {len(tags)} tags")
    return [" ".join(tokens[s:e]) for s, e in span_positions(tags)]
