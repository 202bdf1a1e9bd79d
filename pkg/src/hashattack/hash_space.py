"""Binary hash codes, Hamming retrieval and targeted mean average precision."""

import json
from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    pass


class EmptyIndexError(ValueError):
    pass


def _as_labels(y):
    y = np.asarray(y)
    if y.ndim != 1:
        raise DimensionError(f"label vector must be 1-d, got shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("label vector entries must be 0 or 1")
    return y.astype(np.int8)


def _as_code(b):
    b = np.asarray(b)
    if b.ndim != 1:
        raise DimensionError(f"hash code must be 1-d, got shape {b.shape}")
    if not np.all((b == 1) | (b == -1)):
        raise ValueError("hash code entries must be exactly -1 or +1")
    return b.astype(np.int8)


def pairwise_similarity(a, b):
    """1 if the two label vectors share at least one class, else 0."""
    a, b = _as_labels(a), _as_labels(b)
    if a.shape != b.shape:
        raise DimensionError(f"label lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return int(np.any((a == 1) & (b == 1)))


def sign_binarize(c):
    """Element-wise sign with sign(0) = +1."""
    c = np.asarray(c, dtype=np.float64)
    if np.isnan(c).any():
        raise ValueError("NaN in continuous code")
    if np.isinf(c).any():
        raise ValueError("Inf in continuous code")
    return np.where(c >= 0, 1, -1).astype(np.int8)


def hamming_distance(a, b):
    a, b = _as_code(a), _as_code(b)
    if a.shape != b.shape:
        raise DimensionError(f"code lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return 0.5 * float(np.abs(a.astype(np.int64) - b).sum())


def hamming_to_many(codes, query):
    """Distances from ``query`` to each row of ``codes`` via (k - B q) / 2."""
    codes = np.asarray(codes, dtype=np.int64)
    query = np.asarray(query, dtype=np.int64)
    if codes.shape[1] != query.shape[0]:
        raise DimensionError(f"code lengths differ: {codes.shape[1]} vs {query.shape[0]}")
    return (codes.shape[1] - codes @ query) // 2


@dataclass(frozen=True)
class RetrievalIndex:
    ids: tuple
    codes: np.ndarray  # (n, k) int8 in {-1, +1}
    labels: np.ndarray  # (n, C) int8 in {0, 1}
    _order: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int8)
        labels = np.array(self.labels, dtype=np.int8)
        ids = tuple(self.ids)
        if codes.ndim != 2 or labels.ndim != 2:
            raise DimensionError("codes and labels must be 2-d arrays")
        if not (len(ids) == codes.shape[0] == labels.shape[0]):
            raise DimensionError("ids, codes and labels disagree on the number of entries")
        if len(set(ids)) != len(ids):
            raise ValueError("index ids must be unique")
        if codes.size and not np.all((codes == 1) | (codes == -1)):
            raise ValueError("hash code entries must be exactly -1 or +1")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise ValueError("label entries must be 0 or 1")
        codes.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)
        # rank of each id under ascending sort, used for tie-breaking
        object.__setattr__(self, "_order", np.argsort(np.argsort(np.array(ids, dtype=object), kind="stable"), kind="stable"))

    @classmethod
    def from_entries(cls, entries):
        """Build from an iterable of ``(id, code, labels)`` triples."""
        entries = list(entries)
        if not entries:
            raise EmptyIndexError("cannot build an index from zero entries")
        ids = [e[0] for e in entries]
        codes = np.stack([_as_code(e[1]) for e in entries])
        labels = np.stack([_as_labels(e[2]) for e in entries])
        return cls(ids, codes, labels)

    @property
    def k(self):
        return self.codes.shape[1]

    @property
    def num_classes(self):
        return self.labels.shape[1]

    def __len__(self):
        return len(self.ids)


def _topk_positions(index, query, K):
    if len(index) == 0:
        raise EmptyIndexError("retrieval on an empty index")
    query = _as_code(query)
    if query.shape[0] != index.k:
        raise DimensionError(f"query has k={query.shape[0]}, index has k={index.k}")
    if K < 1:
        raise ValueError("K must be a positive integer")
    if K > len(index):
        raise ValueError(f"K={K} exceeds index size {len(index)}")
    dist = hamming_to_many(index.codes, query)
    # lexsort: last key is primary
    order = np.lexsort((index._order, dist))
    return order[:K]


def retrieve_topk(index, query, K):
    """Ids of the K nearest codes, by ascending Hamming distance then ascending id."""
    return [index.ids[i] for i in _topk_positions(index, query, K)]


def average_precision(relevance):
    """AP of a ranked 0/1 relevance list; 0 when nothing relevant was retrieved."""
    rel = np.asarray(relevance, dtype=np.float64)
    if rel.sum() == 0:
        return 0.0
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float(np.sum(rel * hits / ranks) / rel.sum())


def query_ap(index, query, target_label, K):
    pos = _topk_positions(index, query, K)
    target = _as_labels(target_label)
    if target.shape[0] != index.num_classes:
        raise DimensionError("target label length does not match index class count")
    rel = (index.labels[pos] @ target.astype(np.int64)) > 0
    return average_precision(rel)


def t_map_at_k(index, queries, K, return_per_query=False):
    """Targeted mAP: relevance is label overlap with each query's target label.

    ``queries`` is a sequence of ``(hash_code, target_label)`` pairs.
    """
    if K == 0:
        raise ValueError("K must be a positive integer")
    queries = list(queries)
    if not queries:
        raise ValueError("t-MAP needs at least one query")
    aps = [query_ap(index, code, target, K) for code, target in queries]
    t_map = float(np.mean(aps))
    if return_per_query:
        return t_map, aps
    return t_map


def metrics_report(index, queries, K):
    t_map, aps = t_map_at_k(index, queries, K, return_per_query=True)
    return {"t_map": t_map, "K": int(K), "num_queries": len(aps), "per_query_ap": aps}


# ---- persistence ----

def save_index(index, path):
    lines = [f"k={index.k} C={index.num_classes}"]
    for id_, code, lab in zip(index.ids, index.codes, index.labels):
        id_s = str(id_)
        if "\t" in id_s or "\n" in id_s:
            raise ValueError(f"id {id_s!r} contains a tab or newline")
        lines.append(
            id_s + "\t" + ",".join(str(int(v)) for v in lab) + "\t" + ",".join(str(int(v)) for v in code)
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_index(path):
    """Read an index written by :func:`save_index`. Ids come back as strings."""
    with open(path) as f:
        header = f.readline().strip()
        fields = dict(kv.split("=") for kv in header.split())
        k, C = int(fields["k"]), int(fields["C"])
        ids, codes, labels = [], [], []
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            id_s, lab_s, code_s = line.split("\t")
            ids.append(id_s)
            labels.append([int(v) for v in lab_s.split(",")])
            codes.append([int(v) for v in code_s.split(",")])
    codes = np.array(codes, dtype=np.int8).reshape(-1, k)
    labels = np.array(labels, dtype=np.int8).reshape(-1, C)
    return RetrievalIndex(ids, codes, labels)


def save_metrics(report, path):
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
