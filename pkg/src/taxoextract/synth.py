"""Seeded synthetic product corpus with category-dependent attribute values.

The generated taxonomy has two domains and twelve leaf categories. A pool of
ambiguous words is split into two classes. Each class is a flavor value in
some mid-level groups and a non-value descriptor in the others; in the
cosmetics group (where flavor does not apply) the same words name shades.
Brands and generic product nouns are shared by all categories, so for many
titles the text alone does not say which reading is right.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import ProductRecord, write_products
from .taxonomy import TaxonomyTree, write_taxonomy

TAXONOMY = [
    ("Product", None, "Product"),
    ("grocery", "Product", "Grocery"),
    ("frozen", "grocery", "Frozen Desserts"),
    ("ice_cream", "frozen", "Ice Cream"),
    ("frozen_yogurt", "frozen", "Frozen Yogurt"),
    ("popsicles", "frozen", "Popsicles"),
    ("beverages", "grocery", "Beverages"),
    ("tea", "beverages", "Tea"),
    ("coffee", "beverages", "Coffee"),
    ("soda", "beverages", "Soda"),
    ("beauty", "Product", "Beauty"),
    ("oral_care", "beauty", "Oral Care"),
    ("toothpaste", "oral_care", "Toothpaste"),
    ("mouthwash", "oral_care", "Mouthwash"),
    ("lip_balm", "oral_care", "Lip Balm"),
    ("cosmetics", "beauty", "Cosmetics"),
    ("eyeshadow", "cosmetics", "Eyeshadow"),
    ("nail_polish", "cosmetics", "Nail Polish"),
    ("mascara", "cosmetics", "Mascara"),
]

APPLICABLE_GROUPS = ("frozen", "beverages", "oral_care")
INAPPLICABLE_GROUP = "cosmetics"

AMBIGUOUS = ("cherry", "mint", "vanilla", "peach", "coconut", "lemon", "berry", "caramel",
             "honey", "espresso", "cinnamon", "plum")

LEAF_FLAVORS = {
    "ice_cream": ("cookie dough", "rocky road", "butter pecan"),
    "frozen_yogurt": ("mango swirl", "blueberry tart", "key lime"),
    "popsicles": ("fruit punch", "watermelon", "blue raspberry"),
    "tea": ("earl grey", "chamomile", "jasmine green"),
    "coffee": ("french roast", "hazelnut", "dark mocha"),
    "soda": ("root beer", "ginger ale", "cola"),
    "toothpaste": ("spearmint", "wintergreen", "bubble gum"),
    "mouthwash": ("arctic blast", "clean citrus", "icy fresh"),
    "lip_balm": ("strawberry kiss", "sweet orange", "pink grapefruit"),
}

COSMETIC_SHADES = ("taupe", "navy", "coral", "bronze", "rose gold", "smoky gray")

LEAF_NOUNS = {
    "ice_cream": ("ice cream", "gelato"),
    "frozen_yogurt": ("frozen yogurt", "froyo"),
    "popsicles": ("ice pops", "popsicles"),
    "tea": ("tea bags", "herbal tea"),
    "coffee": ("ground coffee", "coffee pods"),
    "soda": ("soda", "sparkling drink"),
    "toothpaste": ("toothpaste", "tooth gel"),
    "mouthwash": ("mouthwash", "oral rinse"),
    "lip_balm": ("lip balm", "lip care"),
    "eyeshadow": ("eyeshadow", "eye palette"),
    "nail_polish": ("nail polish", "nail lacquer"),
    "mascara": ("mascara", "lash tint"),
}

GENERIC_NOUNS = ("classic", "original", "collection", "edition", "deluxe", "signature", "select",
                 "essentials")
BRANDS = ("Acme", "Nordic", "Sunny", "Greenfield", "Blue Harbor", "Maple & Co", "Vita", "Purely",
          "Goldleaf", "Zest", "Luna", "Evergreen", "Bright", "Summit", "Orchard")
SIZES = ("16 oz", "8 oz", "12 ct", "3.4 fl oz", "6 pack", "2 pk", "100 g", "")


def taxonomy_tree() -> TaxonomyTree:
    return TaxonomyTree.from_parents([(n, p) for n, p, _ in TAXONOMY], {n: name for n, _, name in TAXONOMY})


def group_of(tree: TaxonomyTree, leaf: str) -> str:
    return tree.parent[leaf]


def assign_roles(rng: np.random.Generator) -> dict[str, list[str]]:
    """Flavor words per applicable group.

    The ambiguous pool is shuffled into two classes. The first class is a
    flavor in frozen desserts and oral care, the second in beverages; any
    word that is not a flavor in a group serves there as a decoy descriptor.
    """
    words = [AMBIGUOUS[i] for i in rng.permutation(len(AMBIGUOUS))]
    half = len(words) // 2
    first, second = sorted(words[:half]), sorted(words[half:])
    return {"frozen": list(first), "beverages": list(second), "oral_care": list(first)}


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


def generate(seed: int = 0, n_products: int = 2000, decoy_rate: float = 0.6):
    """Return ``(tree, records, lexicon)`` for the given seed."""
    rng = np.random.default_rng(seed)
    tree = taxonomy_tree()
    flavors = assign_roles(rng)
    decoys = {g: [w for w in AMBIGUOUS if w not in flavors[g]] for g in APPLICABLE_GROUPS}
    leaves = tree.leaves()
    records = []
    for idx in range(n_products):
        leaf = leaves[int(rng.integers(len(leaves)))]
        group = group_of(tree, leaf)
        brand = _pick(rng, BRANDS)
        noun = _pick(rng, LEAF_NOUNS[leaf]) if rng.random() < 0.5 else _pick(rng, GENERIC_NOUNS)
        size = _pick(rng, SIZES)
        if group == INAPPLICABLE_GROUP:
            value = None
            main = _pick(rng, AMBIGUOUS) if rng.random() < 0.75 else _pick(rng, COSMETIC_SHADES)
            extra = _pick(rng, AMBIGUOUS) if rng.random() < decoy_rate else None
            if extra == main:
                extra = None
        else:
            pool = list(flavors[group]) + list(LEAF_FLAVORS[leaf])
            value = main = _pick(rng, pool)
            extra = _pick(rng, decoys[group]) if rng.random() < decoy_rate else None
        body = [main] if extra is None else ([main, extra] if rng.random() < 0.5 else [extra, main])
        if rng.random() < 0.5:
            words = [brand] + body + [noun]
        else:
            words = [brand, noun, "-"] + body
        if size:
            words.append(size)
        title = " ".join(w.title() if rng.random() < 0.5 else w for w in words)
        if value is None:
            description = f"{main} shade {noun} by {brand}"
            gold = {"brand": [brand]}
        else:
            description = f"{value} flavored {noun} by {brand}"
            gold = {"flavor": [value], "brand": [brand]}
        records.append(ProductRecord(f"p{idx:05d}", title, leaf, description, gold))
    lexicon = {
        "ambiguous": list(AMBIGUOUS),
        "flavors_by_group": flavors,
        "decoys_by_group": decoys,
        "leaf_flavors": {k: list(v) for k, v in LEAF_FLAVORS.items()},
        "inapplicable_categories": [n for n in leaves if group_of(tree, n) == INAPPLICABLE_GROUP],
        "cosmetic_shades": list(COSMETIC_SHADES),
    }
    return tree, records, lexicon


def is_ambiguous(record: ProductRecord, lexicon: dict) -> bool:
    words = set(record.title.lower().split())
    return any(w in words for w in lexicon["ambiguous"])


def write_corpus(out_dir, seed: int = 0, n_products: int = 2000) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tree, records, lexicon = generate(seed, n_products)
    write_taxonomy(tree, out / "taxonomy.jsonl")
    write_products(records, out / "products.jsonl")
    with open(out / "lexicon.json", "w", encoding="utf-8") as fh:
        json.dump(lexicon, fh, indent=2, sort_keys=True)
    return {"taxonomy": str(out / "taxonomy.jsonl"), "products": str(out / "products.jsonl"),
            "lexicon": str(out / "lexicon.json")}
