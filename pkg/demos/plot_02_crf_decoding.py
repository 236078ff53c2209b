"""
A constrained linear-chain CRF
==============================

The CRF scores whole tag sequences. Transitions that break the BIOE grammar
carry a large negative score, so decoding only ever returns parseable tags.
"""

import itertools

import numpy as np

from taxoextract.crf import ALLOWED, crf_neg_log_likelihood, init_transitions, viterbi_decode

rng = np.random.default_rng(0)
trans = init_transitions()
trans[ALLOWED] = rng.normal(scale=0.5, size=ALLOWED.sum())

# emission scores for a 4-token title, columns B I O E
em = rng.normal(size=(4, 4))
best = viterbi_decode(em, trans)
print("viterbi:", best)

# the probabilities of every tag sequence sum to one
total = 0.0
for seq in itertools.product("BIOE", repeat=4):
    try:
        total += np.exp(-crf_neg_log_likelihood(em, list(seq), trans))
    except ValueError:
        pass  # illegal under the grammar
print(f"sum of sequence probabilities: {total:.12f}")

# the decoded path is also the most likely one
print("NLL of best path:", round(crf_neg_log_likelihood(em, best, trans), 4))
