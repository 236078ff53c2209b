"""Category tree, hyperbolic category embeddings and hierarchical targets."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

BALL_EPS = 1e-5


class TaxonomyError(ValueError):
    pass


@dataclass
class TaxonomyTree:
    """Rooted category tree.

    ``order`` keeps nodes in input order and fixes the index of every node in
    embedding tables and classifier outputs.
    """

    root: str
    parent: dict[str, str | None]
    order: list[str]
    names: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.children: dict[str, list[str]] = {n: [] for n in self.order}
        for node in self.order:
            p = self.parent[node]
            if p is not None:
                self.children[p].append(node)
        self.level: dict[str, int] = {self.root: 0}
        stack = [self.root]
        while stack:
            node = stack.pop()
            for child in self.children[node]:
                self.level[child] = self.level[node] + 1
                stack.append(child)
        self.index = {n: i for i, n in enumerate(self.order)}
        self.label_nodes = [n for n in self.order if n != self.root]
        self.label_index = {n: i for i, n in enumerate(self.label_nodes)}

    @classmethod
    def from_parents(cls, parents: dict[str, str | None] | list[tuple[str, str | None]],
                     names: dict[str, str] | None = None) -> "TaxonomyTree":
        items = list(parents.items()) if isinstance(parents, dict) else list(parents)
        parent: dict[str, str | None] = {}
        order = []
        for node, par in items:
            if node in parent:
                raise TaxonomyError(f"duplicate node id {node!r}")
            parent[node] = par
            order.append(node)
        roots = [n for n in order if parent[n] is None]
        if len(roots) != 1:
            raise TaxonomyError(f"expected exactly one root, found {len(roots)}: {roots[:5]}")
        for node in order:
            p = parent[node]
            if p is not None and p not in parent:
                raise TaxonomyError(f"node {node!r} has unknown parent {p!r}")
        # Any node that cannot reach the root sits on a cycle.
        reaches_root = {roots[0]: True}
        for node in order:
            path = []
            cur = node
            while cur not in reaches_root:
                if cur in path:
                    start = path.index(cur)
                    cycle = path[start:]
                    child = cycle[-1]
                    raise TaxonomyError(f"cycle detected at edge {child!r} -> {parent[child]!r}")
                path.append(cur)
                cur = parent[cur]
            for p in path:
                reaches_root[p] = True
        names = dict(names or {})
        names.setdefault(roots[0], "Product")
        return cls(roots[0], parent, order, names)

    def __contains__(self, node) -> bool:
        return node in self.parent

    def __len__(self) -> int:
        return len(self.order)

    def name(self, node: str) -> str:
        return self.names.get(node, node)

    def edges(self) -> list[tuple[str, str]]:
        """(parent, child) pairs in node order."""
        return [(self.parent[n], n) for n in self.order if self.parent[n] is not None]

    def leaves(self) -> list[str]:
        return [n for n in self.order if not self.children[n]]

    def ancestors(self, node: str) -> list[str]:
        """Strict ancestors up to and including the root."""
        self._check(node)
        out = []
        cur = self.parent[node]
        while cur is not None:
            out.append(cur)
            cur = self.parent[cur]
        return out

    def _check(self, node):
        if node not in self.parent:
            raise KeyError(f"unknown taxonomy node {node!r}")


def load_taxonomy(path) -> TaxonomyTree:
    """Load ``{"id": ..., "parent": ...}`` JSON lines; an optional ``name`` key is kept."""
    parents = []
    names = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                node, par = obj["id"], obj["parent"]
            except (ValueError, KeyError, TypeError) as exc:
                raise TaxonomyError(f"{path}:{lineno}: malformed taxonomy line ({exc})") from exc
            parents.append((str(node), None if par is None else str(par)))
            if obj.get("name"):
                names[str(node)] = obj["name"]
    return TaxonomyTree.from_parents(parents, names)


def write_taxonomy(tree: TaxonomyTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in tree.order:
            row = {"id": node, "parent": tree.parent[node]}
            if node in tree.names:
                row["name"] = tree.names[node]
            fh.write(json.dumps(row) + "\n")


def ancestor_path(tree: TaxonomyTree, node: str) -> list[str]:
    """``[node, parent(node), ...]`` stopping below the root."""
    tree._check(node)
    path = []
    cur = node
    while cur != tree.root:
        path.append(cur)
        cur = tree.parent[cur]
    return path


# -- distances ---------------------------------------------------------------

def poincare_distance(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    su, sv = float(u @ u), float(v @ v)
    if su >= 1.0 or sv >= 1.0:
        raise ValueError("Poincare distance is only defined inside the open unit ball")
    diff = u - v
    arg = 1.0 + 2.0 * float(diff @ diff) / ((1.0 - su) * (1.0 - sv))
    return float(np.arccosh(arg))


def _poincare_dist_and_grads(u, v):
    """Row-wise distances and their gradients w.r.t. u and v (both (n, m))."""
    su = np.sum(u * u, axis=1)
    sv = np.sum(v * v, axis=1)
    alpha = 1.0 - su
    beta = 1.0 - sv
    sqdist = np.sum((u - v) ** 2, axis=1)
    gamma = 1.0 + 2.0 * sqdist / (alpha * beta)
    dist = np.arccosh(gamma)
    root = np.sqrt(np.maximum(gamma**2 - 1.0, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(root > 0, 4.0 / (alpha * beta * root), 0.0)
    uv = np.sum(u * v, axis=1)
    gu = coef[:, None] * (((sv - 2 * uv + 1) / alpha)[:, None] * u - v)
    gv = coef[:, None] * (((su - 2 * uv + 1) / beta)[:, None] * v - u)
    return dist, gu, gv


def _euclid_dist_and_grads(u, v):
    diff = u - v
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(dist[:, None] > 0, diff / dist[:, None], 0.0)
    return dist, unit, -unit


def project_to_ball(x: np.ndarray, eps: float = BALL_EPS) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    limit = 1.0 - eps
    # the 1 - 1e-15 factor keeps rounding from landing a hair above the limit
    scale = np.where(norms >= limit, limit * (1 - 1e-15) / np.maximum(norms, 1e-300), 1.0)
    return x * scale


# -- embedding table ---------------------------------------------------------

@dataclass
class CategoryEmbeddingTable:
    nodes: list[str]
    vectors: np.ndarray
    geometry: str = "poincare"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        if self.vectors.shape[0] != len(self.nodes):
            raise ValueError("one vector per node required")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, node) -> bool:
        return node in self.index

    def __getitem__(self, node) -> np.ndarray:
        try:
            return self.vectors[self.index[node]]
        except KeyError:
            raise KeyError(f"no category embedding for node {node!r}") from None

    def distance(self, a: str, b: str) -> float:
        if self.geometry == "poincare":
            return poincare_distance(self[a], self[b])
        return float(np.linalg.norm(self[a] - self[b]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for node, vec in zip(self.nodes, self.vectors):
                fh.write(node + " " + " ".join(repr(float(x)) for x in vec) + "\n")

    @classmethod
    def load(cls, path, geometry: str = "poincare") -> "CategoryEmbeddingTable":
        nodes, rows = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    rows.append([float(x) for x in parts[1:]])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad embedding line") from exc
                nodes.append(parts[0])
        if len({len(r) for r in rows}) > 1:
            raise ValueError(f"{path}: embedding rows have different dimensions")
        return cls(nodes, np.array(rows), geometry)


class EmbeddingTrainingError(FloatingPointError):
    pass


def _neighbour_sets(tree: TaxonomyTree) -> list[set[int]]:
    idx = tree.index
    nbrs = [set() for _ in tree.order]
    for par, child in tree.edges():
        nbrs[idx[par]].add(idx[child])
        nbrs[idx[child]].add(idx[par])
    return nbrs


def train_embeddings(tree: TaxonomyTree, dim: int = 50, epochs: int = 200, lr: float = 0.3,
                     negatives: int = 10, seed: int = 0, geometry: str = "poincare",
                     burn_in: int = 10, batch_size: int = 10, history: list | None = None
                     ) -> CategoryEmbeddingTable:
    """Fit node embeddings with the softmax-over-negatives edge loss.

    For each edge (child u, parent v) the loss is
    ``-log(exp(-d(u, v)) / sum_{v' in {v} + negatives} exp(-d(u, v')))``.
    Negatives for u are drawn uniformly (with replacement) from the nodes not
    adjacent to u; u itself counts as a non-neighbour, which keeps the loss
    informative on trees where u touches every other node.

    Poincare updates rescale the Euclidean gradient by ``(1 - |x|^2)^2 / 4``
    and project back inside the ball; Euclidean updates are plain SGD.
    The first ``burn_in`` epochs use ``lr / 10``.
    """
    if dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    if geometry not in ("poincare", "euclidean"):
        raise ValueError(f"unknown geometry {geometry!r}")
    rng = np.random.default_rng(seed)
    n = len(tree)
    emb = rng.uniform(-0.001, 0.001, size=(n, dim))
    edges = np.array([(tree.index[c], tree.index[p]) for p, c in tree.edges()], dtype=np.int64)
    if len(edges) == 0:
        return CategoryEmbeddingTable(list(tree.order), emb, geometry)
    nbrs = _neighbour_sets(tree)
    pools = [np.array([j for j in range(n) if j not in nbrs[i]], dtype=np.int64) for i in range(n)]
    dist_fn = _poincare_dist_and_grads if geometry == "poincare" else _euclid_dist_and_grads

    for epoch in range(epochs):
        rate = lr / 10 if epoch < burn_in else lr
        order = rng.permutation(len(edges))
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = edges[order[start:start + batch_size]]
            us, vs = batch[:, 0], batch[:, 1]
            negs = np.stack([pools[u][rng.integers(0, len(pools[u]), size=negatives)] for u in us])
            cand = np.concatenate([vs[:, None], negs], axis=1)  # (b, 1 + k)
            bsz, k1 = cand.shape
            uu = np.repeat(emb[us], k1, axis=0)
            vv = emb[cand.reshape(-1)]
            dist, gu, gv = dist_fn(uu, vv)
            dist = dist.reshape(bsz, k1)
            logits = -dist
            shift = logits.max(axis=1, keepdims=True)
            logz = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
            loss = logz - logits[:, 0]
            if not np.all(np.isfinite(loss)):
                bad = int(np.flatnonzero(~np.isfinite(loss))[0])
                u, v = tree.order[us[bad]], tree.order[vs[bad]]
                raise EmbeddingTrainingError(f"non-finite loss at epoch {epoch}, edge {u!r} -> {v!r}")
            epoch_loss += float(loss.sum())
            # d loss / d dist_j = onehot_j - softmax_j(-dist)
            dd = -np.exp(logits - logz[:, None])
            dd[:, 0] += 1.0
            dd = dd.reshape(-1, 1)
            grad = np.zeros_like(emb)
            np.add.at(grad, np.repeat(us, k1), dd * gu)
            np.add.at(grad, cand.reshape(-1), dd * gv)
            if geometry == "poincare":
                scale = (1.0 - np.sum(emb**2, axis=1, keepdims=True)) ** 2 / 4.0
                emb = project_to_ball(emb - rate * scale * grad)
            else:
                emb = emb - rate * grad
        if history is not None:
            history.append(epoch_loss / len(edges))
    return CategoryEmbeddingTable(list(tree.order), emb, geometry)


def train_poincare(tree, dim=50, epochs=200, lr=0.3, negatives=10, seed=0, **kwargs):
    return train_embeddings(tree, dim, epochs, lr, negatives, seed, geometry="poincare", **kwargs)


def train_euclidean(tree, dim=50, epochs=200, lr=0.1, negatives=10, seed=0, **kwargs):
    return train_embeddings(tree, dim, epochs, lr, negatives, seed, geometry="euclidean", **kwargs)


def mean_edge_distance(tree: TaxonomyTree, table: CategoryEmbeddingTable) -> float:
    return float(np.mean([table.distance(p, c) for p, c in tree.edges()]))


# -- classification targets --------------------------------------------------

@dataclass
class HierTargets:
    """Labels and per-node loss weights over ``tree.label_nodes`` (root excluded)."""

    labels: np.ndarray
    weights: np.ndarray


def hierarchical_targets(tree: TaxonomyTree, node: str, w: float = 1.0) -> HierTargets:
    if not 0.0 < w <= 1.0:
        raise ValueError(f"w must lie in (0, 1], got {w}")
    path = ancestor_path(tree, node)
    depth = len(path)
    if depth == 0:
        raise ValueError("products cannot be assigned to the taxonomy root")
    labels = np.zeros(len(tree.label_nodes))
    weights = np.full(len(tree.label_nodes), w ** (depth - 1))
    for k, anc in enumerate(path):
        j = tree.label_index[anc]
        labels[j] = 1.0
        weights[j] = w**k
    return HierTargets(labels, weights)


def flat_targets(tree: TaxonomyTree, node: str) -> HierTargets:
    tree._check(node)
    if node == tree.root:
        raise ValueError("products cannot be assigned to the taxonomy root")
    labels = np.zeros(len(tree.label_nodes))
    labels[tree.label_index[node]] = 1.0
    return HierTargets(labels, np.ones(len(tree.label_nodes)))
