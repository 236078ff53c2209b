import numpy as np
import pytest

from taxoextract.corpus import ProductRecord
from taxoextract.taxonomy import TaxonomyTree


@pytest.fixture
def beer_tree():
    return TaxonomyTree.from_parents(
        [("Product", None), ("grocery", "Product"), ("beer", "grocery"), ("lager", "beer"),
         ("ale", "beer"), ("snacks", "grocery"), ("beauty", "Product"), ("lipstick", "beauty")],
        {"grocery": "Grocery", "beer": "Beer", "lager": "Lager", "ale": "Pale Ale", "snacks": "Snacks",
         "beauty": "Beauty", "lipstick": "Lipstick"})


@pytest.fixture
def toy_records():
    return [
        ProductRecord("a", "Acme vanilla ice cream 16 oz", "lager", "", {"flavor": ["vanilla"]}),
        ProductRecord("b", "Nordic cherry lager pack", "ale", "", {"flavor": ["cherry"]}),
        ProductRecord("c", "Sunny mint lipstick", "lipstick", "", {}),
        ProductRecord("d", "Acme salted caramel chips", "snacks", "", {"flavor": ["salted caramel"]}),
    ]


def binary_tree(depth=3):
    parents = [("n0", None)]
    k = 1
    frontier = ["n0"]
    for _ in range(depth):
        nxt = []
        for p in frontier:
            for _ in range(2):
                parents.append((f"n{k}", p))
                nxt.append(f"n{k}")
                k += 1
        frontier = nxt
    return TaxonomyTree.from_parents(parents)


def random_tree(rng: np.random.Generator, n: int) -> TaxonomyTree:
    parents = [("r", None)]
    for i in range(1, n):
        p = "r" if i == 1 else (f"x{int(rng.integers(1, i))}" if rng.random() < 0.8 else "r")
        parents.append((f"x{i}", p))
    return TaxonomyTree.from_parents(parents)
