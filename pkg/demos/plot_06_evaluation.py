"""
Product-level evaluation
========================

A product counts as correct when the extraction hits at least one gold value
and adds nothing that is not gold. Extra values make the whole product wrong.
"""

from taxoextract.evaluation import ProductEvalOutcome, average_precision, extraction_metrics, judge

print(judge(["v1", "v2", "v3"], ["v1"]))   # wrong: two extra values
print(judge(["v1"], ["v1", "v2"]))         # matched: one gold value is enough
print(judge([], ["v1"]))                   # empty-extraction

outcomes = [
    ProductEvalOutcome(["mint"], ["mint"], "toothpaste"),
    ProductEvalOutcome(["mint", "lemon"], ["lemon"], "soda"),
    ProductEvalOutcome([], ["cherry"], "soda"),
    ProductEvalOutcome(["vanilla"], ["vanilla", "bean"], "ice_cream"),
    ProductEvalOutcome([], [], "lipstick"),
]
report = extraction_metrics(outcomes)
print(report.table())
for cat, row in report.per_category.items():
    print(f"{cat:12} F1 {row['f1']:.2f}")

# category prediction is scored with the step-wise precision-recall area
print("AUPR:", average_precision([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0]))
