"""Dataset ingestion and link-prediction set construction.

Feature files use the svmlight text format, one sample per line:

    <label> <index>:<value> <index>:<value> ...

with 1-based, strictly increasing indices; ``#`` starts a comment.

Link-prediction data consists of two node-feature matrices A and B plus
a list of positive (i, j) node-index pairs.  A pair's input vector is
the concatenation of the two nodes' features.  Splitting follows the
protocol: positives are split by a seeded shuffle, the same number of
negatives as training positives is sampled uniformly without
replacement from the non-positive pairs, and the test side keeps the
remaining positives plus the remaining negatives (subsampled to a cap
when the universe is large).  With B = A the graph is undirected: only
i < j pairs are candidates and self-pairs are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import SampleMatrix, SparseVector

__all__ = [
    "ParseError",
    "load_svmlight",
    "dump_svmlight",
    "LinkDataset",
    "load_link_files",
    "make_pair_sample",
    "LinkSplit",
    "split_links",
]

DEFAULT_TEST_NEGATIVE_CAP = 200_000


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, message, line):
        self.line = line
        super().__init__("line %d: %s" % (line, message))


def _open_maybe(source, mode="r"):
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        return open(source, mode), True
    return source, False


def load_svmlight(source, n_features=None):
    """Read an svmlight-format text source.

    Parameters
    ----------
    source : path or text file object
    n_features : int, optional
        Force the feature dimension; defaults to the largest index seen.

    Returns
    -------
    X : SampleMatrix
    y : ndarray of shape (n,)

    Raises
    ------
    ParseError
        On malformed labels, tokens, or non-increasing indices, naming
        the offending line.
    """
    fh, close = _open_maybe(source)
    labels = []
    indptr = [0]
    indices = []
    data = []
    max_index = -1
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ParseError("non-numeric label %r" % parts[0],
                                 lineno) from None
            prev = -1
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError("malformed token %r" % tok, lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError("malformed token %r" % tok, lineno) from None
                if idx < 1:
                    raise ParseError("indices are 1-based, got %d" % idx, lineno)
                idx -= 1
                if idx <= prev:
                    raise ParseError("indices must be strictly increasing",
                                     lineno)
                prev = idx
                if val != 0.0:  # explicit zeros are dropped
                    indices.append(idx)
                    data.append(val)
                max_index = max(max_index, idx)
            indptr.append(len(indices))
    finally:
        if close:
            fh.close()
    d = max_index + 1 if n_features is None else int(n_features)
    if d <= max_index:
        raise ValueError("n_features=%d too small for max index %d"
                         % (d, max_index + 1))
    d = max(d, 1)
    X = SampleMatrix(len(labels), d,
                     np.asarray(indptr, dtype=np.int64),
                     np.asarray(indices, dtype=np.int64),
                     np.asarray(data, dtype=np.float64))
    return X, np.asarray(labels, dtype=np.float64)


def dump_svmlight(X, y, sink):
    """Write a dataset in svmlight format with 17-significant-digit values."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.n,):
        raise ValueError("targets have shape %r, expected (%d,)" % (y.shape, X.n))
    fh, close = _open_maybe(sink, "w")
    try:
        for i in range(X.n):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            toks = ["%.17g" % y[i]]
            toks.extend("%d:%.17g" % (X.indices[r] + 1, X.data[r])
                        for r in range(lo, hi))
            fh.write(" ".join(toks) + "\n")
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# Link prediction
# ---------------------------------------------------------------------------

@dataclass
class LinkDataset:
    """Node features plus observed links.

    Attributes
    ----------
    A : SampleMatrix
        Features of the left nodes, one row per node.
    B : SampleMatrix or None
        Features of the right nodes; None means B = A (undirected
        graph, only i < j pairs are considered).
    positives : ndarray of shape (n_pos, 2)
        Observed link index pairs (0-based rows into A and B).
    seed : int or None
        Default seed for split_links when no generator is passed.
    """

    A: SampleMatrix
    B: SampleMatrix | None
    positives: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.positives, dtype=np.int64)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] == 0:
            raise ValueError("positives must be a nonempty (n, 2) array")
        n_a = self.A.n
        n_b = n_a if self.B is None else self.B.n
        if pos.min() < 0 or pos[:, 0].max() >= n_a or pos[:, 1].max() >= n_b:
            raise ValueError("positive pair index out of range")
        if self.symmetric:
            if np.any(pos[:, 0] == pos[:, 1]):
                raise ValueError("self-pairs are not valid links when B = A")
            pos = np.sort(pos, axis=1)  # canonical i < j
        codes = self._codes(pos)
        if np.unique(codes).size != codes.size:
            raise ValueError("duplicate positive pairs")
        self.positives = pos

    @property
    def symmetric(self):
        return self.B is None

    @property
    def n_right(self):
        return self.A.n if self.B is None else self.B.n

    def _codes(self, pairs):
        return pairs[:, 0] * self.n_right + pairs[:, 1]

    def n_candidates(self):
        """Total candidate pairs, positives included."""
        if self.symmetric:
            return self.A.n * (self.A.n - 1) // 2
        return self.A.n * self.B.n

    def pair_input(self, i, j):
        b = self.A if self.B is None else self.B
        return make_pair_sample(self.A.row(i), b.row(j))


def make_pair_sample(a_i, b_j):
    """Concatenate two node-feature vectors into one pair input."""
    indices = np.concatenate([a_i.indices, b_j.indices + a_i.dim])
    values = np.concatenate([a_i.values, b_j.values])
    return SparseVector(a_i.dim + b_j.dim, indices, values)


def load_link_files(a_source, b_source, pairs_source):
    """Assemble a LinkDataset from svmlight node files and a pair list.

    ``pairs_source`` holds one ``i j`` pair of 0-based node indices per
    line (``#`` comments allowed).  Pass ``b_source=None`` for an
    undirected graph over the A nodes.
    """
    A, _ = load_svmlight(a_source)
    B = None
    if b_source is not None:
        B, _ = load_svmlight(b_source)
    fh, close = _open_maybe(pairs_source)
    pairs = []
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected 'i j', got %r" % line, lineno)
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError("non-integer pair %r" % line, lineno) from None
    finally:
        if close:
            fh.close()
    if not pairs:
        raise ValueError("no positive pairs found")
    return LinkDataset(A=A, B=B, positives=np.asarray(pairs, dtype=np.int64))


@dataclass
class LinkSplit:
    """Materialized train/test sets produced by split_links."""

    X_train: SampleMatrix
    y_train: np.ndarray
    train_pairs: np.ndarray
    X_test: SampleMatrix
    y_test: np.ndarray
    test_pairs: np.ndarray
    test_negatives_total: int
    test_negatives_used: int

    @property
    def test_negatives_capped(self):
        return self.test_negatives_used < self.test_negatives_total


def _decode(ld, codes):
    n_b = ld.n_right
    return np.stack([codes // n_b, codes % n_b], axis=1)


def _upper_tri_codes(n):
    # codes i*n + j for all i < j
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64) * n + j.astype(np.int64)


def _sample_negative_codes(ld, count, rng):
    """Draw ``count`` distinct non-positive pair codes uniformly."""
    pos_codes = set(ld._codes(ld.positives).tolist())
    n_a, n_b = ld.A.n, ld.n_right
    universe = ld.n_candidates()
    available = universe - len(pos_codes)
    if count > available:
        raise ValueError("requested %d negatives but only %d non-positive "
                         "pairs exist" % (count, available))
    if universe <= max(4 * count, 2_000_000):
        # small universe: enumerate, filter, shuffle
        codes = (_upper_tri_codes(n_a) if ld.symmetric
                 else np.arange(n_a * n_b, dtype=np.int64))
        codes = codes[~np.isin(codes, np.fromiter(pos_codes, dtype=np.int64,
                                                  count=len(pos_codes)))]
        rng.shuffle(codes)
        return codes[:count]
    # large universe: batched rejection sampling
    chosen = []
    seen = set(pos_codes)
    while len(chosen) < count:
        batch = count - len(chosen)
        if ld.symmetric:
            a = rng.integers(0, n_a, size=2 * batch)
            b = rng.integers(0, n_a, size=2 * batch)
            keep = a != b
            lo, hi = np.minimum(a, b)[keep], np.maximum(a, b)[keep]
            cand = lo * n_b + hi
        else:
            cand = rng.integers(0, universe, size=2 * batch)
        for c in cand.tolist():
            if c not in seen:
                seen.add(c)
                chosen.append(c)
                if len(chosen) == count:
                    break
    return np.asarray(chosen, dtype=np.int64)


def _pairs_to_matrix(ld, pairs):
    A = ld.A
    B = ld.A if ld.B is None else ld.B
    d = A.d + B.d
    na = A.row_nnz()
    nb = B.row_nnz()
    counts = na[pairs[:, 0]] + nb[pairs[:, 1]]
    indptr = np.zeros(len(pairs) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int64)
    data = np.empty(indptr[-1], dtype=np.float64)
    for r, (i, j) in enumerate(pairs):
        pos = indptr[r]
        alo, ahi = A.indptr[i], A.indptr[i + 1]
        blo, bhi = B.indptr[j], B.indptr[j + 1]
        k = ahi - alo
        indices[pos:pos + k] = A.indices[alo:ahi]
        data[pos:pos + k] = A.data[alo:ahi]
        indices[pos + k:pos + counts[r]] = B.indices[blo:bhi] + A.d
        data[pos + k:pos + counts[r]] = B.data[blo:bhi]
    return SampleMatrix(len(pairs), d, indptr, indices, data, check=False)


def split_links(ld, train_fraction=0.5, rng=None, negative_label=0.0,
                test_negative_cap=DEFAULT_TEST_NEGATIVE_CAP):
    """Split a LinkDataset into training and test sets.

    Positives are shuffled and split by ``train_fraction``.  Training
    negatives are drawn uniformly without replacement from non-positive
    pairs, as many as there are training positives; the test set gets
    the remaining positives plus the remaining negatives, subsampled to
    ``test_negative_cap`` when there are more (the split records both
    counts).  Positive label is +1; ``negative_label`` should be 0 for
    squared loss or -1 for logistic loss.

    Returns
    -------
    LinkSplit
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    if rng is None:
        rng = np.random.default_rng(ld.seed)
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    pos = ld.positives.copy()
    rng.shuffle(pos, axis=0)
    n_train_pos = int(len(pos) * train_fraction)
    if n_train_pos == 0 or n_train_pos == len(pos):
        raise ValueError("train_fraction leaves an empty split")
    train_pos, test_pos = pos[:n_train_pos], pos[n_train_pos:]

    available = ld.n_candidates() - len(pos)
    want = n_train_pos + min(test_negative_cap, max(available - n_train_pos, 0))
    neg_codes = _sample_negative_codes(ld, want, rng)
    train_neg = _decode(ld, neg_codes[:n_train_pos])
    test_neg = _decode(ld, neg_codes[n_train_pos:])

    train_pairs = np.concatenate([train_pos, train_neg])
    y_train = np.concatenate([np.ones(len(train_pos)),
                              np.full(len(train_neg), negative_label)])
    test_pairs = np.concatenate([test_pos, test_neg])
    y_test = np.concatenate([np.ones(len(test_pos)),
                             np.full(len(test_neg), negative_label)])
    return LinkSplit(
        X_train=_pairs_to_matrix(ld, train_pairs),
        y_train=y_train,
        train_pairs=train_pairs,
        X_test=_pairs_to_matrix(ld, test_pairs),
        y_test=y_test,
        test_pairs=test_pairs,
        test_negatives_total=available - n_train_pos,
        test_negatives_used=len(test_neg),
    )
