"""Description length of a corpus under a network, and the MDL fitness.

Two routes compute |D:G|.  :func:`data_cost` runs every sequence with the
vectorized simulator.  :class:`Scorer` is the search hot path: it folds the
training corpus into a prefix trie (sequences sharing a prefix share the
network state up to that point) and evaluates a compiled network over the
trie with a numba kernel.  Both give the same value up to summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import total_ordering

import numba
import numpy as np

from .genome import STANDARD, EncodingScheme, Network, encode_network
from .simulator import normalize_rows, plan, simulate_sequences
from .tasks import Corpus, TaskKind

__all__ = [
    "MdlScore",
    "data_cost",
    "mdl_score",
    "surprisal_bits",
    "predicted_probabilities",
    "Scorer",
    "CorpusTrie",
]


@total_ordering
@dataclass(frozen=True, eq=False)
class MdlScore:
    """``grammar_bits + data_bits``; an impossible target makes ``data_bits`` infinite.

    Ordering: total, then grammar bits, then the encoding as a string.
    """

    grammar_bits: int
    data_bits: float
    encoding: str = field(default="", repr=False)

    @property
    def total(self) -> float:
        return self.grammar_bits + self.data_bits

    @property
    def finite(self) -> bool:
        return math.isfinite(self.data_bits)

    def sort_key(self) -> tuple:
        return (self.total, self.grammar_bits, self.encoding)

    def __eq__(self, other):
        if not isinstance(other, MdlScore):
            return NotImplemented
        return self.sort_key() == other.sort_key()

    def __lt__(self, other):
        if not isinstance(other, MdlScore):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __hash__(self):
        return hash(self.sort_key())

    def report(self) -> str:
        return f"G={self.grammar_bits} D:G={self.data_bits:.6f} total={self.total:.6f}"

    __str__ = report


def _check_arity(net: Network, corpus: Corpus) -> None:
    if net.n_inputs != corpus.task.n_inputs or net.n_outputs != corpus.task.n_outputs:
        raise ValueError(
            f"network arity ({net.n_inputs}, {net.n_outputs}) does not match task "
            f"{corpus.task.value} ({corpus.task.n_inputs}, {corpus.task.n_outputs})"
        )


def predicted_probabilities(net: Network, corpus: Corpus) -> np.ndarray:
    """(S, V) predicted next-symbol distributions (V = 2 for addition)."""
    _check_arity(net, corpus)
    raw, ok = simulate_sequences(net, corpus.inputs, corpus.offsets)
    if corpus.task is TaskKind.ADDITION:
        with np.errstate(invalid="ignore"):
            p1 = np.clip(raw[:, 0], 0.0, 1.0)
        p1 = np.where(ok & np.isfinite(raw[:, 0]), p1, 0.5)
        return np.stack([1.0 - p1, p1], axis=1)
    return normalize_rows(raw, ok)


def surprisal_bits(probs: np.ndarray, targets: np.ndarray) -> float:
    """Total ``-log2 P(target)``; infinite if any target has probability 0."""
    p = probs[np.arange(len(targets)), targets]
    if np.any(p <= 0):
        return math.inf
    return math.fsum((-np.log2(p)).tolist())


def data_cost(net: Network, corpus: Corpus) -> float:
    """|D:G| in bits, by running every sequence."""
    if corpus.n_steps == 0:
        _check_arity(net, corpus)
        return 0.0
    return surprisal_bits(predicted_probabilities(net, corpus), corpus.targets)


def mdl_score(net: Network, corpus: Corpus, scheme: EncodingScheme = STANDARD) -> MdlScore:
    bits = encode_network(net, scheme)
    return MdlScore(len(bits), data_cost(net, corpus), bits)


# ---------------------------------------------------------------------------
# trie route


@dataclass(frozen=True)
class CorpusTrie:
    """Distinct prefixes of a corpus; parents precede children.

    ``counts[i, v]`` is how many times target ``v`` follows prefix ``i``.
    """

    parent: np.ndarray  # (M,) int64, -1 for first steps
    inputs: np.ndarray  # (M, n_inputs) float64
    counts: np.ndarray  # (M, V) float64
    clamp: bool
    n_steps: int

    @classmethod
    def build(cls, corpus: Corpus) -> "CorpusTrie":
        children: dict = {}
        parent: list[int] = []
        rows: list[int] = []  # a corpus row holding this node's input
        V = 2 if corpus.task is TaskKind.ADDITION else len(corpus.vocabulary)
        keys = [tuple(r) for r in corpus.inputs.tolist()]
        node_of_step = np.empty(corpus.n_steps, dtype=np.int64)
        offsets = corpus.offsets.tolist()
        for i in range(len(corpus)):
            node = -1
            for s in range(offsets[i], offsets[i + 1]):
                k = (node, keys[s])
                nxt = children.get(k)
                if nxt is None:
                    nxt = len(parent)
                    children[k] = nxt
                    parent.append(node)
                    rows.append(s)
                node_of_step[s] = nxt
                node = nxt
        M = len(parent)
        counts = np.zeros((M, V))
        np.add.at(counts, (node_of_step, corpus.targets), 1.0)
        inputs = corpus.inputs[np.asarray(rows, dtype=np.int64)].astype(np.float64) if M else np.zeros((0, corpus.inputs.shape[1]))
        return cls(np.asarray(parent, dtype=np.int64), inputs, counts, corpus.task is TaskKind.ADDITION, corpus.n_steps)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)


def compile_network(net: Network):
    """Flat arrays describing the evaluation schedule, for the kernel."""
    ops = plan(net)
    n_ops = len(ops)
    unit = np.empty(n_ops, dtype=np.int64)
    code = np.empty(n_ops, dtype=np.int64)
    product = np.empty(n_ops, dtype=np.bool_)
    has_bias = np.empty(n_ops, dtype=np.bool_)
    bias = np.zeros(n_ops)
    start = np.zeros(n_ops + 1, dtype=np.int64)
    src, rec, wn, wd = [], [], [], []
    for k, op in enumerate(ops):
        unit[k] = op.unit
        code[k] = op.code
        product[k] = op.product
        has_bias[k] = op.bias is not None
        if op.bias is not None:
            bias[k] = op.bias[0] / op.bias[1]
        for s, r, n, d in op.terms:
            src.append(s)
            rec.append(r)
            wn.append(n)
            wd.append(d)
        start[k + 1] = len(src)
    return (
        unit,
        code,
        product,
        has_bias,
        bias,
        start,
        np.asarray(src, dtype=np.int64),
        np.asarray(rec, dtype=np.bool_),
        np.asarray(wn, dtype=np.float64),
        np.asarray(wd, dtype=np.float64),
    )


@numba.njit(cache=True, nogil=True)
def _activate_scalar(code, x):
    if code == 0:
        return x
    if code == 1:
        return 1.0 / (1.0 + np.exp(-x))
    if code == 2:
        return 0.0 if x < 0 else x
    if code == 3:
        return x * x
    if code == 4:
        return np.floor(x)
    if code == 5:
        return 1.0 if x > 0 else 0.0
    return x - 3.0 * np.floor(x / 3.0)


@numba.njit(cache=True, nogil=True)
def _trie_cost(parent, inputs, counts, clamp, n_units, n_in, n_out, unit, code, product, has_bias, bias, start, src, rec, wn, wd):
    M = parent.shape[0]
    V = counts.shape[1]
    values = np.zeros((M, n_units))
    zero = np.zeros(n_units)
    total = 0.0
    dist = np.empty(V)
    for i in range(M):
        cur = values[i]
        prev = zero if parent[i] < 0 else values[parent[i]]
        for j in range(n_in):
            cur[j] = inputs[i, j]
        for k in range(unit.shape[0]):
            if product[k]:
                acc = 0.0
                first = True
                for e in range(start[k], start[k + 1]):
                    x = prev[src[e]] if rec[e] else cur[src[e]]
                    term = x * wn[e] / wd[e]
                    if first:
                        acc = term
                        first = False
                    else:
                        acc = acc * term
                if has_bias[k]:
                    if first:
                        acc = bias[k]
                        first = False
                    else:
                        acc = acc * bias[k]
            else:
                acc = bias[k] if has_bias[k] else 0.0
                for e in range(start[k], start[k + 1]):
                    x = prev[src[e]] if rec[e] else cur[src[e]]
                    acc = acc + x * wn[e] / wd[e]
            cur[unit[k]] = _activate_scalar(code[k], acc)
        finite = True
        for j in range(n_units):
            if not np.isfinite(cur[j]):
                finite = False
                break
        if clamp:
            p1 = 0.5
            if finite:
                p1 = min(max(cur[n_in], 0.0), 1.0)
            dist[0] = 1.0 - p1
            dist[1] = p1
        else:
            s = 0.0
            for v in range(V):
                r = cur[n_in + v]
                r = 0.0 if r < 0 else r
                dist[v] = r
                s += r
            if not finite or s == 0.0 or not np.isfinite(s):
                for v in range(V):
                    dist[v] = 1.0 / V
            else:
                for v in range(V):
                    dist[v] = dist[v] / s
        for v in range(V):
            c = counts[i, v]
            if c > 0:
                if dist[v] <= 0.0:
                    return np.inf
                total += -c * np.log2(dist[v])
    return total


class Scorer:
    """Cached MDL scoring of many networks against one corpus."""

    def __init__(self, corpus: Corpus, scheme: EncodingScheme = STANDARD, cache_size: int = 200_000):
        self.corpus = corpus
        self.scheme = scheme
        self.trie = CorpusTrie.build(corpus)
        self.cache: dict[str, MdlScore] = {}
        self.cache_size = cache_size
        self.evaluations = 0

    def data_cost(self, net: Network) -> float:
        _check_arity(net, self.corpus)
        if self.trie.n_nodes == 0:
            return 0.0
        t = self.trie
        return float(
            _trie_cost(
                t.parent, t.inputs, t.counts, t.clamp, net.n_units, net.n_inputs, net.n_outputs, *compile_network(net)
            )
        )

    def score(self, net: Network, bits: str | None = None) -> MdlScore:
        if bits is None:
            bits = encode_network(net, self.scheme)
        hit = self.cache.get(bits)
        if hit is not None:
            return hit
        self.evaluations += 1
        result = MdlScore(len(bits), self.data_cost(net), bits)
        if len(self.cache) >= self.cache_size:
            self.cache.clear()
        self.cache[bits] = result
        return result
