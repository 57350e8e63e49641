"""Network genotype and its canonical prefix-free binary encoding.

A network is a list of units: the input units come first, then the output
units, then any hidden units.  Python-side indices are 0-based (so a network
with three inputs has its first output at index 3); the binary encoding writes
1-based unit numbers.

Bitstrings are plain ``str`` objects over ``"0"``/``"1"``.
"""
from __future__ import annotations

import enum
import heapq
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable

__all__ = [
    "Activation",
    "Aggregation",
    "RationalWeight",
    "Connection",
    "Unit",
    "Network",
    "EncodingScheme",
    "STANDARD",
    "EXTENDED",
    "COMPACT",
    "InvalidNetwork",
    "MalformedEncoding",
    "encode_integer",
    "decode_integer",
    "encode_weight",
    "decode_weight",
    "encode_network",
    "decode_network",
    "grammar_cost",
    "format_network",
    "parse_network",
    "write_genome_file",
    "read_genome_file",
    "genome_file_bytes",
    "parse_genome_bytes",
    "to_dot",
]


class InvalidNetwork(ValueError):
    """A network violates a structural invariant."""


class MalformedEncoding(ValueError):
    """A bitstring is not a valid code word; ``offset`` is the failing bit."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at bit {offset})")
        self.offset = offset


class Activation(enum.Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"
    RELU = "relu"
    SQUARE = "square"
    FLOOR = "floor"
    STEP = "step"
    MODULO3 = "modulo3"

    @property
    def cost_bits(self) -> int:
        return _ACTIVATION_COST[self]


_ACTIVATION_COST = {
    Activation.LINEAR: 0,
    Activation.SQUARE: 2,
    Activation.RELU: 4,
    Activation.SIGMOID: 4,
    Activation.FLOOR: 4,
    Activation.STEP: 8,
    Activation.MODULO3: 4,
}


class Aggregation(enum.Enum):
    SUM = "sum"
    PRODUCT = "product"


@dataclass(frozen=True, slots=True)
class RationalWeight:
    """Signed fraction ``sign * numerator / denominator``.

    Not reduced: ``+2/4`` and ``+1/2`` are different genomes with different
    encodings but the same value.
    """

    sign: int
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.numerator < 0:
            raise ValueError("numerator must be non-negative")
        if self.denominator < 1:
            raise ValueError("denominator must be positive")

    @classmethod
    def of(cls, value) -> "RationalWeight":
        """Build from an int, Fraction or ``"+n/d"`` string."""
        if isinstance(value, str):
            return cls.parse(value)
        frac = Fraction(value)
        return cls(1 if frac >= 0 else -1, abs(frac.numerator), frac.denominator)

    @classmethod
    def parse(cls, text: str) -> "RationalWeight":
        m = re.fullmatch(r"\s*([+-]?)(\d+)(?:/(\d+))?\s*", text)
        if not m:
            raise ValueError(f"not a weight: {text!r}")
        sign = -1 if m.group(1) == "-" else 1
        return cls(sign, int(m.group(2)), int(m.group(3) or 1))

    @property
    def value(self) -> Fraction:
        return Fraction(self.sign * self.numerator, self.denominator)

    def __float__(self) -> float:
        return (self.sign * self.numerator) / self.denominator

    def __neg__(self) -> "RationalWeight":
        return RationalWeight(-self.sign, self.numerator, self.denominator)

    def __str__(self) -> str:
        return f"{'+' if self.sign > 0 else '-'}{self.numerator}/{self.denominator}"


@dataclass(frozen=True, slots=True)
class Connection:
    target: int
    weight: RationalWeight
    recurrent: bool = False

    @property
    def key(self) -> tuple[int, bool]:
        return (self.target, self.recurrent)


@dataclass(frozen=True, slots=True)
class Unit:
    activation: Activation = Activation.LINEAR
    aggregation: Aggregation = Aggregation.SUM
    bias: RationalWeight | None = None
    outgoing: tuple[Connection, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.outgoing, key=lambda c: c.key))
        object.__setattr__(self, "outgoing", ordered)


@dataclass(frozen=True, eq=True)
class Network:
    """Variable-topology recurrent network genotype.

    Construction validates every invariant and raises :class:`InvalidNetwork`:
    input units are plain linear sum units with no bias and no incoming
    connections, targets are in range, each source has at most one connection
    per ``(target, kind)`` and the forward-connection graph is acyclic.
    """

    n_inputs: int
    n_outputs: int
    units: tuple[Unit, ...]
    _topo: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        self._validate()

    @classmethod
    def empty(cls, n_inputs: int, n_outputs: int, activation=Activation.LINEAR) -> "Network":
        units = [Unit()] * n_inputs + [Unit(activation)] * n_outputs
        return cls(n_inputs, n_outputs, tuple(units))

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def output_indices(self) -> range:
        return range(self.n_inputs, self.n_inputs + self.n_outputs)

    @property
    def hidden_indices(self) -> range:
        return range(self.n_inputs + self.n_outputs, self.n_units)

    @property
    def topological_order(self) -> tuple[int, ...]:
        """All units, forward sources before their targets (ties by index)."""
        return self._topo

    def connections(self) -> Iterable[tuple[int, Connection]]:
        for src, unit in enumerate(self.units):
            for conn in unit.outgoing:
                yield src, conn

    @property
    def n_connections(self) -> int:
        return sum(len(u.outgoing) for u in self.units)

    @cached_property
    def incoming(self) -> tuple[tuple[tuple[int, Connection], ...], ...]:
        """Per target unit, its ``(source, connection)`` pairs in source order."""
        lists: list[list] = [[] for _ in self.units]
        for src, conn in self.connections():
            lists[conn.target].append((src, conn))
        return tuple(tuple(x) for x in lists)

    def replace_unit(self, index: int, unit: Unit) -> "Network":
        units = list(self.units)
        units[index] = unit
        return Network(self.n_inputs, self.n_outputs, tuple(units))

    def _validate(self) -> None:
        n = len(self.units)
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise InvalidNetwork("a network needs at least one input and one output")
        if n < self.n_inputs + self.n_outputs:
            raise InvalidNetwork(
                f"{n} units cannot hold {self.n_inputs} inputs and {self.n_outputs} outputs"
            )
        indegree = [0] * n
        fwd: list[list[int]] = [[] for _ in range(n)]
        for i, unit in enumerate(self.units):
            if i < self.n_inputs:
                if unit.activation is not Activation.LINEAR or unit.aggregation is not Aggregation.SUM:
                    raise InvalidNetwork(f"input unit {i} must be a linear sum unit")
                if unit.bias is not None:
                    raise InvalidNetwork(f"input unit {i} cannot carry a bias")
            seen = set()
            for conn in unit.outgoing:
                if not 0 <= conn.target < n:
                    raise InvalidNetwork(f"unit {i} targets missing unit {conn.target}")
                if conn.target < self.n_inputs:
                    raise InvalidNetwork(f"unit {i} feeds input unit {conn.target}")
                if conn.key in seen:
                    raise InvalidNetwork(f"unit {i} has duplicate connection to {conn.target}")
                seen.add(conn.key)
                if not conn.recurrent:
                    if conn.target == i:
                        raise InvalidNetwork(f"forward self-loop on unit {i}")
                    fwd[i].append(conn.target)
                    indegree[conn.target] += 1
        # Kahn's algorithm, smallest index first so the order is canonical
        ready = [i for i in range(n) if indegree[i] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            i = heapq.heappop(ready)
            order.append(i)
            for j in fwd[i]:
                indegree[j] -= 1
                if indegree[j] == 0:
                    heapq.heappush(ready, j)
        if len(order) != n:
            raise InvalidNetwork("forward connections contain a cycle")
        object.__setattr__(self, "_topo", tuple(order))


@dataclass(frozen=True)
class EncodingScheme:
    """Which activations exist (their order fixes the ids) and optional fields.

    ``extended`` enables Product aggregation and the modulo-3 activation, and
    adds one aggregation bit per unit.  ``biases`` adds a one-bit presence flag
    per unit, followed by the bias weight when set.
    """

    activations: tuple[Activation, ...] = (
        Activation.LINEAR,
        Activation.SIGMOID,
        Activation.RELU,
        Activation.SQUARE,
        Activation.FLOOR,
        Activation.STEP,
    )
    extended: bool = False
    biases: bool = True

    def __post_init__(self):
        acts = tuple(self.activations)
        object.__setattr__(self, "activations", acts)
        if not acts or acts[0] is not Activation.LINEAR:
            raise ValueError("the linear activation must come first")
        if len(set(acts)) != len(acts):
            raise ValueError("duplicate activation")
        if Activation.MODULO3 in acts and not self.extended:
            raise ValueError("modulo3 requires the extended scheme")

    @property
    def id_width(self) -> int:
        return math.ceil(math.log2(len(self.activations))) if len(self.activations) > 1 else 0

    @cached_property
    def _ids(self) -> dict[Activation, str]:
        w = self.id_width
        return {a: format(i, f"0{w}b") if w else "" for i, a in enumerate(self.activations)}

    def activation_id(self, act: Activation) -> str:
        try:
            return self._ids[act]
        except KeyError:
            raise InvalidNetwork(f"activation {act.value} is not enabled") from None

    def check(self, net: Network) -> None:
        for i, unit in enumerate(net.units):
            self.activation_id(unit.activation)
            if unit.aggregation is Aggregation.PRODUCT and not self.extended:
                raise InvalidNetwork(f"unit {i}: product units need the extended scheme")
            if unit.bias is not None and not self.biases:
                raise InvalidNetwork(f"unit {i}: biases are disabled in this scheme")

    @property
    def name(self) -> str:
        for name, scheme in _NAMED_SCHEMES.items():
            if scheme == self:
                return name
        return "custom"

    @staticmethod
    def named(name: str) -> "EncodingScheme":
        try:
            return _NAMED_SCHEMES[name]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; choose from {sorted(_NAMED_SCHEMES)}") from None


STANDARD = EncodingScheme()
EXTENDED = EncodingScheme(STANDARD.activations + (Activation.MODULO3,), extended=True)
#: The four-function, bias-free layout drawn in the worked encoding example.
COMPACT = EncodingScheme(
    (Activation.LINEAR, Activation.SIGMOID, Activation.RELU, Activation.SQUARE), biases=False
)
_NAMED_SCHEMES = {"standard": STANDARD, "extended": EXTENDED, "compact": COMPACT}


# ---------------------------------------------------------------------------
# integers and weights


def encode_integer(n: int) -> str:
    """Prefix-free code: unary bit length, ``0`` separator, binary payload.

    >>> encode_integer(3), encode_integer(1), encode_integer(0)
    ('11011', '101', '0')
    """
    if n < 0:
        raise ValueError("only non-negative integers are encodable")
    if n == 0:
        return "0"
    payload = format(n, "b")
    return "1" * len(payload) + "0" + payload


def _read_integer(bits: str, pos: int) -> tuple[int, int]:
    start = pos
    end = len(bits)
    while pos < end and bits[pos] == "1":
        pos += 1
    if pos >= end:
        raise MalformedEncoding("unterminated length prefix", start if start >= end else pos)
    width = pos - start
    pos += 1
    if width == 0:
        return 0, pos
    if pos + width > end:
        raise MalformedEncoding("truncated integer payload", end)
    payload = bits[pos : pos + width]
    if payload[0] != "1":
        raise MalformedEncoding("integer payload has a leading zero", pos)
    for k, ch in enumerate(payload):
        if ch not in "01":
            raise MalformedEncoding(f"invalid bit {ch!r}", pos + k)
    return int(payload, 2), pos + width


def decode_integer(bits: str) -> tuple[int, str]:
    """Inverse of :func:`encode_integer`; returns the value and the unread rest."""
    n, pos = _read_integer(bits, 0)
    return n, bits[pos:]


def encode_weight(w: RationalWeight) -> str:
    return ("1" if w.sign > 0 else "0") + encode_integer(w.numerator) + encode_integer(w.denominator)


def _read_weight(bits: str, pos: int) -> tuple[RationalWeight, int]:
    if pos >= len(bits):
        raise MalformedEncoding("missing weight sign", pos)
    sign = 1 if bits[pos] == "1" else -1
    num, pos = _read_integer(bits, pos + 1)
    at = pos
    den, pos = _read_integer(bits, pos)
    if den == 0:
        raise MalformedEncoding("zero denominator", at)
    return RationalWeight(sign, num, den), pos


def decode_weight(bits: str) -> tuple[RationalWeight, str]:
    w, pos = _read_weight(bits, 0)
    return w, bits[pos:]


# ---------------------------------------------------------------------------
# networks


def _encode_unit(unit: Unit, scheme: EncodingScheme) -> str:
    parts = [scheme.activation_id(unit.activation)]
    if scheme.extended:
        parts.append("1" if unit.aggregation is Aggregation.PRODUCT else "0")
    if scheme.biases:
        if unit.bias is None:
            parts.append("0")
        else:
            parts.append("1")
            parts.append(encode_weight(unit.bias))
    parts.append(encode_integer(len(unit.outgoing)))
    for conn in unit.outgoing:
        parts.append(encode_integer(conn.target + 1))
        parts.append(encode_weight(conn.weight))
        parts.append("1" if conn.recurrent else "0")
    parts.append("1" * unit.activation.cost_bits)
    return "".join(parts)


def encode_network(net: Network, scheme: EncodingScheme = STANDARD) -> str:
    """Canonical bitstring: unit count, then every unit in index order.

    Each unit is its activation id, the aggregation bit (extended scheme
    only), the bias flag and weight (when the scheme has biases), the number of
    outgoing connections, every connection as 1-based target, weight and type
    bit (0 forward, 1 recurrent), and finally the activation's unary cost.
    """
    scheme.check(net)
    return encode_integer(net.n_units) + "".join(_encode_unit(u, scheme) for u in net.units)


def decode_network(
    bits: str, n_inputs: int, n_outputs: int, scheme: EncodingScheme = STANDARD
) -> Network:
    """Exact inverse of :func:`encode_network` for the given arity and scheme."""
    pos = 0
    n_units, pos = _read_integer(bits, pos)
    if n_units < n_inputs + n_outputs:
        raise MalformedEncoding(f"unit count {n_units} below arity", 0)
    width = scheme.id_width
    acts = scheme.activations
    units = []
    for _ in range(n_units):
        unit_start = pos
        if pos + width > len(bits):
            raise MalformedEncoding("truncated activation id", len(bits))
        idx = int(bits[pos : pos + width], 2) if width else 0
        if idx >= len(acts):
            raise MalformedEncoding(f"unknown activation id {idx}", pos)
        activation = acts[idx]
        pos += width
        aggregation = Aggregation.SUM
        if scheme.extended:
            if pos >= len(bits):
                raise MalformedEncoding("truncated aggregation bit", pos)
            aggregation = Aggregation.PRODUCT if bits[pos] == "1" else Aggregation.SUM
            pos += 1
        bias = None
        if scheme.biases:
            if pos >= len(bits):
                raise MalformedEncoding("truncated bias flag", pos)
            flag = bits[pos]
            pos += 1
            if flag == "1":
                bias, pos = _read_weight(bits, pos)
        n_out, pos = _read_integer(bits, pos)
        conns = []
        for _ in range(n_out):
            at = pos
            target, pos = _read_integer(bits, pos)
            if not 1 <= target <= n_units:
                raise MalformedEncoding(f"connection target {target} out of range", at)
            weight, pos = _read_weight(bits, pos)
            if pos >= len(bits):
                raise MalformedEncoding("truncated connection type", pos)
            conns.append(Connection(target - 1, weight, bits[pos] == "1"))
            pos += 1
        keys = [c.key for c in conns]
        if keys != sorted(keys):
            raise MalformedEncoding("connections not in canonical order", unit_start)
        cost = activation.cost_bits
        if bits[pos : pos + cost] != "1" * cost:
            raise MalformedEncoding("bad activation cost bits", pos)
        pos += cost
        units.append(Unit(activation, aggregation, bias, tuple(conns)))
    if pos != len(bits):
        raise MalformedEncoding("trailing bits after network", pos)
    try:
        net = Network(n_inputs, n_outputs, tuple(units))
    except InvalidNetwork as exc:
        raise MalformedEncoding(f"decoded network is invalid: {exc}", 0) from exc
    return net


def grammar_cost(net: Network, scheme: EncodingScheme = STANDARD) -> int:
    """|G|: length in bits of the canonical encoding."""
    return len(encode_network(net, scheme))


# ---------------------------------------------------------------------------
# text form

_TEXT_HEADER = re.compile(r"network\s+inputs=(\d+)\s+outputs=(\d+)\s*$")
_TEXT_UNIT = re.compile(r"unit\s+(\d+)\s+(\w+)(?:\s+(sum|product))?(?:\s+bias\s+(\S+))?\s*$")
_TEXT_CONN = re.compile(r"->\s*(\d+)\s+(\S+)\s+(forward|recurrent)\s*$")


def format_network(net: Network) -> str:
    """Human-readable listing, one unit per line and connections indented."""
    lines = [f"network inputs={net.n_inputs} outputs={net.n_outputs}"]
    for i, unit in enumerate(net.units):
        head = f"unit {i} {unit.activation.value}"
        if unit.aggregation is Aggregation.PRODUCT:
            head += " product"
        if unit.bias is not None:
            head += f" bias {unit.bias}"
        lines.append(head)
        for conn in unit.outgoing:
            kind = "recurrent" if conn.recurrent else "forward"
            lines.append(f"  -> {conn.target} {conn.weight} {kind}")
    return "\n".join(lines) + "\n"


def parse_network(text: str) -> Network:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty network description")
    m = _TEXT_HEADER.match(lines[0])
    if not m:
        raise ValueError(f"bad header line: {lines[0]!r}")
    n_in, n_out = int(m.group(1)), int(m.group(2))
    specs: list[list] = []
    for ln in lines[1:]:
        if (um := _TEXT_UNIT.match(ln)) is not None:
            if int(um.group(1)) != len(specs):
                raise ValueError(f"units must be listed in order, got {ln!r}")
            bias = RationalWeight.parse(um.group(4)) if um.group(4) else None
            agg = Aggregation(um.group(3)) if um.group(3) else Aggregation.SUM
            specs.append([Activation(um.group(2)), agg, bias, []])
        elif (cm := _TEXT_CONN.match(ln)) is not None:
            if not specs:
                raise ValueError("connection before any unit")
            specs[-1][3].append(
                Connection(int(cm.group(1)), RationalWeight.parse(cm.group(2)), cm.group(3) == "recurrent")
            )
        else:
            raise ValueError(f"cannot parse line {ln!r}")
    units = tuple(Unit(a, g, b, tuple(c)) for a, g, b, c in specs)
    return Network(n_in, n_out, units)


# ---------------------------------------------------------------------------
# genome files


def genome_file_bytes(net: Network, scheme: EncodingScheme = STANDARD) -> bytes:
    """Header ``E(n_inputs) E(n_outputs) E(bit length)``, then the genome, zero-padded."""
    body = encode_network(net, scheme)
    bits = encode_integer(net.n_inputs) + encode_integer(net.n_outputs) + encode_integer(len(body)) + body
    bits += "0" * (-len(bits) % 8)
    return int(bits, 2).to_bytes(len(bits) // 8, "big") if bits else b""


def parse_genome_bytes(data: bytes, scheme: EncodingScheme = STANDARD) -> Network:
    bits = "".join(format(b, "08b") for b in data)
    pos = 0
    n_in, pos = _read_integer(bits, pos)
    n_out, pos = _read_integer(bits, pos)
    length, pos = _read_integer(bits, pos)
    if pos + length > len(bits):
        raise MalformedEncoding("genome body shorter than declared", len(bits))
    if "1" in bits[pos + length :]:
        raise MalformedEncoding("non-zero padding", pos + length)
    return decode_network(bits[pos : pos + length], n_in, n_out, scheme)


def write_genome_file(path, net: Network, scheme: EncodingScheme = STANDARD) -> None:
    with open(path, "wb") as fh:
        fh.write(genome_file_bytes(net, scheme))


def read_genome_file(path, scheme: EncodingScheme = STANDARD) -> Network:
    with open(path, "rb") as fh:
        return parse_genome_bytes(fh.read(), scheme)


def to_dot(net: Network, name: str = "network") -> str:
    """Graphviz description; recurrent connections are dashed."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for i, unit in enumerate(net.units):
        if i < net.n_inputs:
            role, color = "in", "gold"
        elif i < net.n_inputs + net.n_outputs:
            role, color = "out", "lightblue"
        else:
            role, color = "hidden", "white"
        label = f"{i}\\n{unit.activation.value}"
        if unit.aggregation is Aggregation.PRODUCT:
            label += " (x)"
        if unit.bias is not None:
            label += f"\\nbias {unit.bias}"
        lines.append(f'  u{i} [label="{label}", style=filled, fillcolor={color}, tooltip="{role}"];')
    for src, conn in net.connections():
        style = "dashed" if conn.recurrent else "solid"
        lines.append(f'  u{src} -> u{conn.target} [label="{conn.weight}", style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
