"""Task corpora, ground-truth next-symbol oracles and test-set construction.

Language-modeling tasks feed one-hot symbols; every sequence starts with
``#`` and ``#`` is also the target after its last symbol.  The addition task
feeds pairs of binary digits, least significant first, and the target at
step ``i`` is digit ``i`` of the sum.

Each language is described by an automaton over *canonical* states: two
prefixes with the same state have the same distribution over continuations.
The automaton supplies the exact next-symbol distribution (the oracle) and is
also what :mod:`mdlrnn.refnets` explores when verifying networks.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TaskKind",
    "InvalidPrefix",
    "CounterLanguage",
    "DyckLanguage",
    "language",
    "Corpus",
    "sample_geometric",
    "generate_training",
    "generate_test",
    "oracle_next",
    "deterministic_mask",
    "in_language",
    "write_corpus",
    "read_corpus",
    "addition_sequence",
]

END = ("end",)


class TaskKind(enum.Enum):
    ANBN = "anbn"
    ANBNCN = "anbncn"
    ANBNCNDN = "anbncndn"
    ANB2N = "anb2n"
    ANBMCNM = "anbmcnm"
    DYCK1 = "dyck1"
    DYCK2 = "dyck2"
    ADDITION = "addition"

    @property
    def is_language(self) -> bool:
        return self is not TaskKind.ADDITION

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return _VOCAB[self]

    @property
    def n_inputs(self) -> int:
        return 2 if self is TaskKind.ADDITION else len(self.vocabulary)

    @property
    def n_outputs(self) -> int:
        return 1 if self is TaskKind.ADDITION else len(self.vocabulary)


_VOCAB = {
    TaskKind.ANBN: ("#", "a", "b"),
    TaskKind.ANBNCN: ("#", "a", "b", "c"),
    TaskKind.ANBNCNDN: ("#", "a", "b", "c", "d"),
    TaskKind.ANB2N: ("#", "a", "b"),
    TaskKind.ANBMCNM: ("#", "a", "b", "c"),
    TaskKind.DYCK1: ("#", "[", "]"),
    TaskKind.DYCK2: ("#", "[", "]", "(", ")"),
    TaskKind.ADDITION: ("0", "1"),
}


class InvalidPrefix(ValueError):
    """The prefix cannot start a sequence of the language."""


# ---------------------------------------------------------------------------
# automata


class CounterLanguage:
    """Languages like a^n b^m c^(n+m): geometric phases, then determined phases.

    ``phases`` lists ``(symbol, coefficients)``; ``None`` marks a free phase
    whose length is drawn from the geometric distribution, otherwise the
    phase length is the dot product of ``coefficients`` with the free lengths.
    Free phases must precede determined ones.

    States: ``(phase, count, free_lengths)`` inside a free phase and
    ``(phase, remaining, later_lengths)`` inside a determined one.
    """

    def __init__(self, vocabulary, phases, p: float = 0.3):
        self.vocabulary = tuple(vocabulary)
        self.phases = tuple(phases)
        self.p = p
        self.n_free = sum(1 for _, c in self.phases if c is None)
        if any(c is None for _, c in self.phases[self.n_free :]):
            raise ValueError("free phases must come first")
        self._index = {s: i for i, s in enumerate(self.vocabulary)}

    def start(self):
        return (0, 0, ())

    def _next_symbol(self, phase: int) -> str:
        return self.phases[phase + 1][0] if phase + 1 < len(self.phases) else "#"

    def is_free(self, q) -> bool:
        return q != END and q[0] < self.n_free

    def oracle(self, q) -> dict[str, float]:
        if q == END:
            raise InvalidPrefix("sequence already ended")
        phase, k, _ = q
        sym = self.phases[phase][0]
        if phase < self.n_free:
            if k == 0:
                return {sym: 1.0}
            return {sym: 1.0 - self.p, self._next_symbol(phase): self.p}
        if k > 0:
            return {sym: 1.0}
        return {self._next_symbol(phase): 1.0}

    def _lengths(self, free: tuple) -> tuple:
        return tuple(sum(c * n for c, n in zip(coef, free)) for _, coef in self.phases[self.n_free :])

    def advance(self, q, symbol: str):
        if q == END:
            raise InvalidPrefix("sequence already ended")
        phase, k, rest = q
        sym = self.phases[phase][0]
        nxt = self._next_symbol(phase)
        if phase < self.n_free:
            if symbol == sym:
                return (phase, k + 1, rest)
            if k > 0 and symbol == nxt:
                free = rest + (k,)
                if phase + 1 < self.n_free:
                    return (phase + 1, 1, free)
                if phase + 1 == len(self.phases):
                    return END
                lengths = self._lengths(free)
                return (phase + 1, lengths[0] - 1, lengths[1:])
        else:
            if k > 0 and symbol == sym:
                return (phase, k - 1, rest)
            if k == 0 and symbol == nxt:
                if phase + 1 == len(self.phases):
                    return END
                return (phase + 1, rest[0] - 1, rest[1:])
        raise InvalidPrefix(f"symbol {symbol!r} not allowed here")

    def successors(self, q, n_max: int) -> list[str]:
        """Symbols with positive probability, free lengths capped at ``n_max``."""
        out = []
        for s in self.oracle(q):
            if self.is_free(q) and s == self.phases[q[0]][0] and q[1] >= n_max:
                continue
            out.append(s)
        return out

    def is_merge_point(self, prev, q) -> bool:
        # entering a determined phase: the state no longer records the path
        return q != END and not self.is_free(q) and (prev is None or prev[0] != q[0])

    def sample_string(self, rng) -> str:
        free = [sample_geometric(self.p, rng) for _ in range(self.n_free)]
        return self.string_for(*free)

    def string_for(self, *free: int) -> str:
        lengths = tuple(free) + self._lengths(tuple(free))
        return "#" + "".join(sym * n for (sym, _), n in zip(self.phases, lengths))


class DyckLanguage:
    """Well-matched brackets; each step opens with total probability ``p``.

    Vocabulary is ``#`` followed by (open, close) pairs.  States are the
    stack of open bracket types.
    """

    def __init__(self, vocabulary, p: float = 0.3):
        self.vocabulary = tuple(vocabulary)
        self.p = p
        self.pairs = [(self.vocabulary[i], self.vocabulary[i + 1]) for i in range(1, len(self.vocabulary), 2)]
        self._open = {o: k for k, (o, _) in enumerate(self.pairs)}
        self._close = {c: k for k, (_, c) in enumerate(self.pairs)}

    def start(self):
        return ()

    def oracle(self, q) -> dict[str, float]:
        if q == END:
            raise InvalidPrefix("sequence already ended")
        share = self.p / len(self.pairs)
        dist = {o: share for o, _ in self.pairs}
        if q:
            dist[self.pairs[q[-1]][1]] = 1.0 - self.p
        else:
            dist["#"] = 1.0 - self.p
        return dist

    def advance(self, q, symbol: str):
        if q == END:
            raise InvalidPrefix("sequence already ended")
        if symbol in self._open:
            return q + (self._open[symbol],)
        if symbol in self._close and q and q[-1] == self._close[symbol]:
            return q[:-1]
        if symbol == "#" and not q:
            return END
        raise InvalidPrefix(f"symbol {symbol!r} not allowed here")

    def successors(self, q, n_max: int) -> list[str]:
        return [s for s in self.oracle(q) if not (s in self._open and len(q) >= n_max)]

    def is_free(self, q) -> bool:
        return True

    def is_merge_point(self, prev, q) -> bool:
        return q != END

    def sample_string(self, rng) -> str:
        q = ()
        out = ["#"]
        opens = [o for o, _ in self.pairs]
        while True:
            u = rng.random()
            if u < self.p:
                sym = opens[min(int(u / self.p * len(opens)), len(opens) - 1)]
            else:
                if not q:
                    return "".join(out)
                sym = self.pairs[q[-1]][1]
            q = self.advance(q, sym)
            out.append(sym)


def language(task: TaskKind, p: float = 0.3):
    task = TaskKind(task)
    v = task.vocabulary
    if task is TaskKind.ANBN:
        return CounterLanguage(v, [("a", None), ("b", (1,))], p)
    if task is TaskKind.ANBNCN:
        return CounterLanguage(v, [("a", None), ("b", (1,)), ("c", (1,))], p)
    if task is TaskKind.ANBNCNDN:
        return CounterLanguage(v, [("a", None), ("b", (1,)), ("c", (1,)), ("d", (1,))], p)
    if task is TaskKind.ANB2N:
        return CounterLanguage(v, [("a", None), ("b", (2,))], p)
    if task is TaskKind.ANBMCNM:
        return CounterLanguage(v, [("a", None), ("b", None), ("c", (1, 1))], p)
    if task in (TaskKind.DYCK1, TaskKind.DYCK2):
        return DyckLanguage(v, p)
    raise ValueError(f"{task.value} is not a language-modeling task")


def oracle_next(task: TaskKind, prefix: str, p: float = 0.3) -> np.ndarray:
    """Exact next-symbol distribution after ``prefix`` (which starts with ``#``)."""
    lang = language(task, p)
    q = _run(lang, prefix)
    row = np.zeros(len(lang.vocabulary))
    for s, prob in lang.oracle(q).items():
        row[lang.vocabulary.index(s)] = prob
    return row


def _run(lang, prefix: str):
    if not prefix.startswith("#"):
        raise InvalidPrefix("sequences start with '#'")
    q = lang.start()
    for s in prefix[1:]:
        if s not in lang.vocabulary:
            raise InvalidPrefix(f"unknown symbol {s!r}")
        q = lang.advance(q, s)
    return q


def deterministic_mask(task: TaskKind, sequence: str, p: float = 0.3) -> np.ndarray:
    """True at steps whose next symbol is forced."""
    lang = language(task, p)
    q = _run(lang, sequence[:1])
    mask = []
    for t in range(len(sequence)):
        if t:
            q = lang.advance(q, sequence[t])
        mask.append(max(lang.oracle(q).values()) == 1.0)
    return np.array(mask, dtype=bool)


def in_language(task: TaskKind, sequence: str) -> bool:
    """Membership test for a complete input string (without the final ``#``)."""
    try:
        q = _run(language(task), sequence)
        return language(task).advance(q, "#") == END
    except InvalidPrefix:
        return False


def sample_geometric(p: float, rng: np.random.Generator) -> int:
    """Draw n >= 1 with P(n = k) = (1 - p)^(k - 1) p."""
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    return int(rng.geometric(p))


# ---------------------------------------------------------------------------
# corpora


def addition_sequence(n: int, m: int) -> tuple[list[tuple[int, int]], list[int]]:
    """Digit pairs (LSB first) and sum digits, padded to the sum's bit length."""
    length = max((n + m).bit_length(), 1)
    inputs = [((n >> i) & 1, (m >> i) & 1) for i in range(length)]
    targets = [((n + m) >> i) & 1 for i in range(length)]
    return inputs, targets


@dataclass(eq=False)
class Corpus:
    """Sequences stored end to end; ``offsets`` delimits them.

    ``inputs`` holds one row per step (one-hot symbols, or the two addend
    digits), ``targets`` the index of the target symbol (or the sum digit).
    ``items`` keeps the source form: strings for languages, ``(n, m)`` pairs
    for addition.
    """

    task: TaskKind
    items: tuple
    inputs: np.ndarray
    targets: np.ndarray
    offsets: np.ndarray
    p: float = 0.3
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_strings(cls, task: TaskKind, strings: Sequence[str], p: float = 0.3, **meta) -> "Corpus":
        task = TaskKind(task)
        vocab = task.vocabulary
        index = {s: i for i, s in enumerate(vocab)}
        lengths = np.array([len(s) for s in strings], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)])
        joined = "".join(strings)
        try:
            ids = np.array([index[c] for c in joined], dtype=np.int64)
        except KeyError as exc:
            raise InvalidPrefix(f"unknown symbol {exc.args[0]!r}") from None
        inputs = np.zeros((len(ids), len(vocab)), dtype=np.uint8)
        inputs[np.arange(len(ids)), ids] = 1
        targets = np.empty(len(ids), dtype=np.int64)
        if len(ids):
            targets[:-1] = ids[1:]
            targets[offsets[1:] - 1] = index["#"]
        return cls(task, tuple(strings), inputs, targets, offsets, p, dict(meta))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], **meta) -> "Corpus":
        pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
        pairs = pairs.reshape(-1, 2)
        n, m = pairs[:, 0], pairs[:, 1]
        s = n + m
        lengths = np.maximum(_bit_length(s), 1)
        offsets = np.concatenate([[0], np.cumsum(lengths)])
        seq = np.repeat(np.arange(len(pairs)), lengths)
        pos = np.arange(int(offsets[-1])) - offsets[seq]
        inputs = np.stack([(n[seq] >> pos) & 1, (m[seq] >> pos) & 1], axis=1).astype(np.uint8)
        targets = (s[seq] >> pos) & 1
        items = tuple(map(tuple, pairs.tolist()))
        return cls(TaskKind.ADDITION, items, inputs, targets.astype(np.int64), offsets, 0.0, dict(meta))

    def __len__(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_steps(self) -> int:
        return int(self.offsets[-1])

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return self.task.vocabulary

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def sequence(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.offsets[i], self.offsets[i + 1]
        return self.inputs[a:b], self.targets[a:b]

    @cached_property
    def oracle(self) -> np.ndarray:
        """(S, V) true next-symbol distribution at every step."""
        V = len(self.vocabulary)
        if self.task is TaskKind.ADDITION:
            rows = np.zeros((self.n_steps, V))
            rows[np.arange(self.n_steps), self.targets] = 1.0
            return rows
        lang = language(self.task, self.p)
        index = {s: i for i, s in enumerate(lang.vocabulary)}
        cache: dict = {}
        rows = np.zeros((self.n_steps, V))
        t = 0
        for s in self.items:
            q = lang.start()
            for k, sym in enumerate(s):
                if k:
                    q = lang.advance(q, sym)
                row = cache.get(q)
                if row is None:
                    row = np.zeros(V)
                    for sym2, pr in lang.oracle(q).items():
                        row[index[sym2]] = pr
                    cache[q] = row
                rows[t] = row
                t += 1
        return rows

    @cached_property
    def deterministic_mask(self) -> np.ndarray:
        return self.oracle.max(axis=1) == 1.0

    @property
    def max_n(self) -> int | None:
        return self.meta.get("k")

    def concat(self, other: "Corpus") -> "Corpus":
        if other.task is not self.task:
            raise ValueError("cannot concatenate corpora of different tasks")
        if self.task is TaskKind.ADDITION:
            return Corpus.from_pairs(list(self.items) + list(other.items), **self.meta)
        return Corpus.from_strings(self.task, list(self.items) + list(other.items), self.p, **self.meta)

    def subset(self, indices) -> "Corpus":
        items = [self.items[i] for i in indices]
        if self.task is TaskKind.ADDITION:
            return Corpus.from_pairs(items, **self.meta)
        return Corpus.from_strings(self.task, items, self.p, **self.meta)


def _bit_length(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    y = x.copy()
    while np.any(y):
        nz = y > 0
        out[nz] += 1
        y >>= 1
    return out


def _free_counts(task: TaskKind, s: str) -> tuple[int, ...]:
    if task is TaskKind.ANBMCNM:
        return (s.count("a"), s.count("b"))
    return (s.count("a"),)


def generate_training(
    task: TaskKind,
    size: int,
    p: float = 0.3,
    rng: np.random.Generator | int | None = None,
    *,
    addition_range: str = "below",
) -> Corpus:
    """Training corpus of ``size`` sampled sequences.

    For addition, ``size`` is the bound K and the corpus is exhaustive:
    ``addition_range`` picks ``"below"`` ([0, K-1]^2, the default),
    ``"inclusive"`` ([0, K]^2) or ``"one_based"`` ([1, K]^2).
    """
    task = TaskKind(task)
    if size < 1:
        raise ValueError("size must be at least 1")
    seed = rng if isinstance(rng, (int, np.integer)) or rng is None else None
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if task is TaskKind.ADDITION:
        lo, hi = {"below": (0, size - 1), "inclusive": (0, size), "one_based": (1, size)}[addition_range]
        pairs = [(a, b) for a in range(lo, hi + 1) for b in range(lo, hi + 1)]
        return Corpus.from_pairs(pairs, k=size, split="train", size=size, seed=seed, addition_range=addition_range)
    lang = language(task, p)
    strings = [lang.sample_string(rng) for _ in range(size)]
    if isinstance(lang, CounterLanguage):
        k = max(max(_free_counts(task, s)) for s in strings)
    else:
        k = max(len(s) for s in strings)
    return Corpus.from_strings(task, strings, p, k=k, split="train", size=size, seed=seed)


def generate_test(
    task: TaskKind,
    k: int,
    rng: np.random.Generator | int | None = None,
    *,
    p: float = 0.3,
    span: int | None = None,
    exclude: Iterable[str] = (),
    size: int = 50_000,
) -> Corpus:
    """Held-out corpus above the largest training value ``k``.

    Counter languages: every n in [k+1, k+span] (span 1001); for a^n b^m
    c^(n+m) every pair in [k+1, k+span]^2 with span 50 (2,500 pairs).
    Addition: every pair in [k+1, k+span]^2, span 250.  Dyck: ``size``
    sampled sequences not in ``exclude``.
    """
    task = TaskKind(task)
    seed = rng if isinstance(rng, (int, np.integer)) or rng is None else None
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    meta = dict(k=k, split="test", seed=seed)
    if task is TaskKind.ADDITION:
        span = 250 if span is None else span
        r = np.arange(k + 1, k + span + 1)
        pairs = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
        return Corpus.from_pairs(pairs, span=span, **meta)
    lang = language(task, p)
    if isinstance(lang, DyckLanguage):
        seen = set(exclude)
        strings = []
        while len(strings) < size:
            s = lang.sample_string(rng)
            if s not in seen:
                strings.append(s)
        return Corpus.from_strings(task, strings, p, size=size, **meta)
    if task is TaskKind.ANBMCNM:
        span = 50 if span is None else span
        strings = [lang.string_for(n, m) for n in range(k + 1, k + span + 1) for m in range(k + 1, k + span + 1)]
    else:
        span = 1001 if span is None else span
        strings = [lang.string_for(n) for n in range(k + 1, k + span + 1)]
    return Corpus.from_strings(task, strings, p, span=span, **meta)


# ---------------------------------------------------------------------------
# files


def write_corpus(path, corpus: Corpus) -> None:
    """Header lines ``key=value`` then one sequence (or ``n m`` pair) per line."""
    header = {"task": corpus.task.value, "p": corpus.p, **corpus.meta}
    with open(path, "w") as fh:
        fh.write("# mdlrnn corpus\n")
        for key, val in header.items():
            fh.write(f"{key}={val}\n")
        fh.write("---\n")
        for item in corpus.items:
            fh.write(f"{item[0]} {item[1]}\n" if corpus.task is TaskKind.ADDITION else f"{item}\n")


def read_corpus(path) -> Corpus:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# mdlrnn corpus"):
        raise ValueError(f"{path}: not a corpus file")
    try:
        sep = lines.index("---")
    except ValueError:
        raise ValueError(f"{path}: missing header separator") from None
    header = dict(line.split("=", 1) for line in lines[1:sep])
    task = TaskKind(header.pop("task"))
    p = float(header.pop("p"))
    meta = {k: _parse_scalar(v) for k, v in header.items()}
    body = lines[sep + 1 :]
    if task is TaskKind.ADDITION:
        pairs = [tuple(int(x) for x in line.split()) for line in body if line.strip()]
        return Corpus.from_pairs(pairs, **meta)
    return Corpus.from_strings(task, [line for line in body if line], p, **meta)


def _parse_scalar(text: str):
    if text == "None":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def optimal_entropy_rate(task: TaskKind, p: float = 0.3) -> float:
    """Per-step entropy of the Dyck oracle (every step has the same law)."""
    lang = language(task, p)
    if not isinstance(lang, DyckLanguage):
        raise ValueError("only defined for Dyck languages")
    probs = list(lang.oracle(()).values())
    return -sum(x * math.log2(x) for x in probs)
