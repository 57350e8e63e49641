"""Hand-built reference networks and bounded verification of their languages.

Unit numbering is 0-based: inputs first, then outputs, then hidden units, so
for three input symbols the outputs are units 3-5 and the first hidden unit
is 6.

:func:`verify_language` walks every prefix of every string with free lengths
up to ``n_max`` by depth-first search over pairs (automaton state, network
state) and compares each normalized output with the oracle distribution.
Where the automaton state and the exact network state both repeat, the
continuation is identical, so the search reuses the earlier result; the
report says whether the walk was closed this way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .genome import EXTENDED, STANDARD, Activation, Aggregation, Connection, EncodingScheme, Network, RationalWeight, Unit
from .simulator import _step_values, plan
from .tasks import END, TaskKind, language

__all__ = [
    "build_addition_reference",
    "build_dyck2_stack_reference",
    "build_counter_reference",
    "reference_network",
    "reference_scheme",
    "verify_language",
    "VerificationReport",
    "VERIFICATION_MARGINS",
]

L, SIG, RELU, SQ, FLOOR, STEP, MOD3 = (
    Activation.LINEAR,
    Activation.SIGMOID,
    Activation.RELU,
    Activation.SQUARE,
    Activation.FLOOR,
    Activation.STEP,
    Activation.MODULO3,
)


def w(text: str) -> RationalWeight:
    return RationalWeight.parse(text)


def fwd(target: int, weight: str) -> Connection:
    return Connection(target, w(weight), False)


def rec(target: int, weight: str) -> Connection:
    return Connection(target, w(weight), True)


def _net(n_in: int, n_out: int, layout: dict[int, Unit], n_units: int) -> Network:
    units = [layout.get(i, Unit()) for i in range(n_units)]
    return Network(n_in, n_out, tuple(units))


def build_addition_reference() -> Network:
    """Serial binary adder: a floor carry unit and two squaring units.

    Unit 4 holds c = floor(n_i + m_i + c_prev / 2), which is 0..3 and whose
    low bit is the sum digit; ((c - 1)^2 - 1)^2 maps 0, 1, 2, 3 to 0, 1, 0, 1.
    """
    layout = {
        0: Unit(outgoing=(fwd(4, "+1/1"),)),
        1: Unit(outgoing=(fwd(4, "+1/1"),)),
        2: Unit(SQ, bias=w("-1/1")),
        3: Unit(SQ, bias=w("-1/1"), outgoing=(fwd(2, "+1/1"),)),
        4: Unit(FLOOR, outgoing=(fwd(3, "+1/1"), rec(4, "+1/2"))),
    }
    return _net(2, 1, layout, 5)


def build_dyck2_stack_reference() -> Network:
    """Base-3 stack for two bracket kinds, using product gates and modulo 3.

    The memory (unit 15) holds the stack as a base-3 number whose lowest
    digit is the top: ``[`` pushes 1 and ``(`` pushes 2 (memory * 3 + digit),
    a closing symbol pops (floor(memory / 3)).  Unit 16 reads the top as
    memory mod 3 and the outputs follow from it.
    """
    layout = {
        # inputs: 0 '#', 1 '[', 2 ']', 3 '(', 4 ')'
        1: Unit(outgoing=(fwd(10, "+1/1"), fwd(12, "+1/1"))),
        2: Unit(outgoing=(fwd(17, "+1/1"),)),
        3: Unit(outgoing=(fwd(10, "+2/1"), fwd(12, "+1/1"))),
        4: Unit(outgoing=(fwd(17, "+1/1"),)),
        # outputs: 5 '#', 6 '[', 7 ']', 8 '(', 9 ')'
        5: Unit(bias=w("+7/10")),
        6: Unit(bias=w("+3/20")),
        7: Unit(bias=w("+7/10")),
        8: Unit(bias=w("+3/20")),
        9: Unit(bias=w("-7/10")),
        10: Unit(outgoing=(fwd(11, "+1/1"),)),  # memory * 3 + pushed digit
        11: Unit(aggregation=Aggregation.PRODUCT, outgoing=(fwd(15, "+1/1"),)),  # push gate
        12: Unit(outgoing=(fwd(11, "+1/1"),)),  # an opening symbol was read
        13: Unit(aggregation=Aggregation.PRODUCT, outgoing=(fwd(15, "+1/1"),)),  # pop gate
        14: Unit(FLOOR, outgoing=(fwd(13, "+1/1"),)),  # memory / 3
        15: Unit(outgoing=(fwd(16, "+1/1"), rec(10, "+3/1"), rec(14, "+1/3"))),
        16: Unit(MOD3, outgoing=(fwd(5, "-7/10"), fwd(9, "+7/10"), fwd(18, "+1/1"))),
        17: Unit(outgoing=(fwd(13, "+1/1"),)),  # a closing symbol was read
        18: Unit(SQ, bias=w("-1/1"), outgoing=(fwd(7, "-7/10"),)),
    }
    return _net(5, 5, layout, 19)


def _anbn() -> Network:
    layout = {
        1: Unit(outgoing=(fwd(6, "+1/2"),)),
        2: Unit(outgoing=(fwd(4, "-3/1"), fwd(6, "-1/2"))),
        3: Unit(SIG, bias=w("-15/1")),
        4: Unit(bias=w("+7/3")),
        5: Unit(STEP),
        6: Unit(outgoing=(fwd(5, "+1/1"), rec(6, "+1/1"))),
    }
    return _net(3, 3, layout, 7)


def _anbncn() -> Network:
    layout = {
        0: Unit(outgoing=(fwd(5, "+1/1"),)),
        1: Unit(outgoing=(fwd(5, "+7/3"), fwd(8, "+1/1"))),
        3: Unit(outgoing=(fwd(4, "+1/1"), fwd(9, "+1/1"))),
        4: Unit(),
        5: Unit(),
        6: Unit(STEP),
        7: Unit(SIG, bias=w("-15/1")),
        8: Unit(RELU, bias=w("-1/2"), outgoing=(fwd(6, "+1/1"), rec(8, "+1/1"))),
        9: Unit(bias=w("-1/3"), outgoing=(fwd(4, "+1/1"), rec(9, "+1/1"))),
    }
    return _net(4, 4, layout, 10)


def _anb2n() -> Network:
    layout = {
        0: Unit(outgoing=(fwd(4, "+15/1"),)),
        1: Unit(outgoing=(fwd(4, "+1/3"), fwd(6, "-1/1"))),
        2: Unit(outgoing=(rec(5, "-7/1"),)),
        3: Unit(),
        4: Unit(SQ),
        5: Unit(SIG, bias=w("-3/1")),
        6: Unit(bias=w("+1/3"), outgoing=(fwd(3, "+1/1"), rec(6, "+1/1"))),
    }
    return _net(3, 3, layout, 7)


def _anbmcnm() -> Network:
    layout = {
        0: Unit(outgoing=(rec(8, "+1/1"),)),
        1: Unit(outgoing=(fwd(6, "+1/7"),)),
        2: Unit(outgoing=(fwd(5, "-1/1"), fwd(6, "+7/3"), fwd(7, "+1/1"))),
        3: Unit(outgoing=(fwd(5, "-1/1"), fwd(7, "+1/15"), fwd(8, "+1/1"))),
        4: Unit(),
        5: Unit(bias=w("+1/3")),
        6: Unit(),
        7: Unit(SQ),
        8: Unit(bias=w("-1/2"), outgoing=(fwd(4, "+3/1"), rec(8, "+1/1"))),
    }
    return _net(4, 4, layout, 9)


def _dyck1() -> Network:
    layout = {
        0: Unit(outgoing=(fwd(6, "-1/1"),)),
        1: Unit(outgoing=(fwd(6, "-2/1"),)),
        3: Unit(bias=w("+1/1")),
        4: Unit(bias=w("+3/7")),
        5: Unit(STEP),
        6: Unit(bias=w("+1/1"), outgoing=(fwd(3, "+1/1"), fwd(5, "-1/1"), rec(6, "+1/1"))),
    }
    return _net(3, 3, layout, 7)


_COUNTER_BUILDERS = {
    TaskKind.ANBN: _anbn,
    TaskKind.ANBNCN: _anbncn,
    TaskKind.ANB2N: _anb2n,
    TaskKind.ANBMCNM: _anbmcnm,
    TaskKind.DYCK1: _dyck1,
}


def build_counter_reference(task: TaskKind) -> Network:
    """Reference network for a counter language or Dyck-1.

    a^n b^n: hidden unit 6 adds 1/2 per ``a`` and removes 1/2 per ``b``;
    P(b) is a step of it, P(a) = 7/3 - 3*[b], P(#) a saturated sigmoid.
    Dyck-1: hidden unit 6 equals minus the depth after the current symbol
    (it also subtracts one at the initial ``#`` and adds a bias of one).
    """
    task = TaskKind(task)
    try:
        return _COUNTER_BUILDERS[task]()
    except KeyError:
        raise ValueError(f"no counter reference for {task.value}") from None


def reference_network(task: TaskKind) -> Network:
    task = TaskKind(task)
    if task is TaskKind.ADDITION:
        return build_addition_reference()
    if task is TaskKind.DYCK2:
        return build_dyck2_stack_reference()
    return build_counter_reference(task)


def reference_scheme(task: TaskKind) -> EncodingScheme:
    return EXTENDED if TaskKind(task) is TaskKind.DYCK2 else STANDARD


# ---------------------------------------------------------------------------
# verification

#: Largest per-step deviation each counter reference is proven to stay under.
VERIFICATION_MARGINS = {
    TaskKind.ANBN: 1e-6,
    TaskKind.ANBNCN: 1e-6,
    TaskKind.ANB2N: 2e-3,
    TaskKind.ANBMCNM: 3e-3,
    TaskKind.DYCK1: 1e-6,
}


@dataclass
class VerificationReport:
    task: TaskKind
    n_max: int
    margin: float
    passed: bool
    worst_deviation: float
    worst_prefix: str
    first_failure: str | None
    steps: int
    closed: bool
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "task": self.task.value,
            "n_max": self.n_max,
            "margin": self.margin,
            "passed": self.passed,
            "worst_deviation": self.worst_deviation,
            "worst_prefix": _abbrev(self.worst_prefix),
            "first_failure": None if self.first_failure is None else _abbrev(self.first_failure),
            "steps": self.steps,
            "closed": self.closed,
        }

    def __str__(self) -> str:
        lines = [
            f"task={self.task.value} n_max={self.n_max} margin={self.margin:g}",
            f"result={'PASS' if self.passed else 'FAIL'} worst={self.worst_deviation:.3e} at {_abbrev(self.worst_prefix)}",
            f"steps={self.steps} closed={'yes' if self.closed else 'no'}",
        ]
        if self.first_failure is not None:
            lines.append(f"first failure: {_abbrev(self.first_failure)}")
        lines += self.notes
        return "\n".join(lines)


def _abbrev(prefix: str) -> str:
    """Run-length form, e.g. ``#a^3b^2``."""
    if not prefix:
        return prefix
    out = []
    run_sym, run = prefix[0], 0
    for s in prefix + "\0":
        if s == run_sym:
            run += 1
            continue
        out.append(run_sym if run == 1 else f"{run_sym}^{run}")
        run_sym, run = s, 1
    return "".join(out)


def _rational_zero():
    try:
        import gmpy2
    except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
        return Fraction(0)
    return gmpy2.mpq(0)


def _normalized(raw) -> list[float]:
    r = [float(v) for v in raw]
    n = len(r)
    if not all(math.isfinite(v) for v in r):
        return [1.0 / n] * n
    r = [0.0 if v < 0 else v for v in r]
    s = sum(r)
    if s == 0 or not math.isfinite(s):
        return [1.0 / n] * n
    return [v / s for v in r]


def verify_language(
    net: Network, task: TaskKind, n_max: int, margin: float, p: float = 0.3, exact: bool = True
) -> VerificationReport:
    """Compare every step of every string with free lengths <= ``n_max``.

    Dyck languages are explored up to nesting depth ``n_max`` (strings of
    any length).  The deviation at a step is the L-infinity distance between
    the normalized output and the oracle distribution.  With ``exact`` the
    network runs in rational arithmetic (sigmoid outputs excepted), so long
    strings do not accumulate rounding error.
    """
    task = TaskKind(task)
    lang = language(task, p)
    if net.n_inputs != len(lang.vocabulary) or net.n_outputs != len(lang.vocabulary):
        raise ValueError("network arity does not match the task")
    vocab = lang.vocabulary
    index = {s: i for i, s in enumerate(vocab)}
    zero = _rational_zero() if exact else 0.0
    onehot = {s: [zero + (1 if j == index[s] else 0) for j in range(len(vocab))] for s in vocab}
    ops = plan(net)
    n_units, n_in = net.n_units, net.n_inputs
    lo, hi = n_in, n_in + net.n_outputs

    worst, worst_prefix = 0.0, ""
    failure = None
    steps = hits = 0
    seen: set = set()
    path: list[str] = []
    # iterative depth-first search; each entry is one step to simulate
    stack = [(lang.start(), (zero,) * n_units, "#", None, 0)]
    while stack:
        q, prev_values, sym, prev_q, depth = stack.pop()
        del path[depth:]
        path.append(sym)
        values = tuple(_step_values(ops, n_units, n_in, prev_values, onehot[sym], zero))
        steps += 1
        if lang.is_merge_point(prev_q, q):
            key = (q, values)
            if key in seen:
                # identical continuation already checked (or being checked)
                hits += 1
                continue
            seen.add(key)
        finite = all(math.isfinite(v) for v in values)
        dist = _normalized(values[lo:hi]) if finite else [1.0 / (hi - lo)] * (hi - lo)
        oracle = lang.oracle(q)
        dev = max(abs(dist[i] - oracle.get(s, 0.0)) for i, s in enumerate(vocab))
        if dev > worst:
            worst, worst_prefix = dev, "".join(path)
        if dev > margin and failure is None:
            failure = "".join(path)
        for s in reversed(lang.successors(q, n_max)):
            nq = lang.advance(q, s)
            if nq != END:
                stack.append((nq, values, s, q, depth + 1))
    notes = [f"arithmetic={'exact rational' if exact else 'double'}"]
    if hits:
        notes.append(
            f"{hits} revisits of an already checked (automaton state, network state) pair were reused;"
            " every continuation from such a pair behaves identically, so they are covered"
        )
    return VerificationReport(task, n_max, margin, failure is None, worst, worst_prefix, failure, steps, hits > 0, notes)
