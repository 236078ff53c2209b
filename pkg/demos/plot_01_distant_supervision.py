"""
Distant supervision: from catalog values to BIOE tags
=====================================================

Known attribute values are matched against the product title to build
token-level training labels without manual annotation.
"""

from taxoextract.corpus import label_distant, tokenize
from taxoextract.crf import extract_spans

# a title and the flavor value the catalog lists for it
title = tokenize("Ben & Jerry's black cherry cheesecake ice cream")
tags = label_distant(title, ["black cherry cheesecake"])
for tok, tag in zip(title.tokens, tags):
    print(f"{tok:12} {tag}")

# decoding the tags gives back the surface value
print(extract_spans(title, tags))

# overlapping candidates: the match covering more tokens wins
title = tokenize("Acme chocolate fudge bar")
print(label_distant(title, ["fudge", "chocolate fudge"]))

# values absent from the title leave every token outside
print(label_distant(title, ["vanilla"]))
