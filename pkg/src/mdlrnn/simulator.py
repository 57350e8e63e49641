"""Forward evaluation of networks.

Every step, input units take the given values and every other unit, in
forward-topological order, computes ``activation(aggregate(...))`` over its
forward inputs from the current step, its recurrent inputs from the previous
step and its bias.  Weighted inputs are computed as ``x * n / d`` so that
integer-valued quantities stay exact in double precision.

Two scalar modes exist: floats (the default) and exact rationals
(``exact=True``), where everything except sigmoid stays a ``Fraction``.
:func:`simulate_batch` runs many sequences in lockstep with numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .genome import Activation, Aggregation, Network

__all__ = [
    "NetworkState",
    "StepTrace",
    "reset_state",
    "step",
    "run_sequence",
    "trace",
    "normalize_distribution",
    "clamp_probability",
    "sigmoid",
    "format_trace_table",
    "simulate_batch",
    "simulate_sequences",
    "normalize_rows",
]

ACTIVATION_CODES = {
    Activation.LINEAR: 0,
    Activation.SIGMOID: 1,
    Activation.RELU: 2,
    Activation.SQUARE: 3,
    Activation.FLOOR: 4,
    Activation.STEP: 5,
    Activation.MODULO3: 6,
}


@dataclass(frozen=True)
class _Op:
    unit: int
    code: int
    product: bool
    bias: tuple[int, int] | None  # (signed numerator, denominator)
    terms: tuple[tuple[int, bool, int, int], ...]  # (source, recurrent, signed num, den)


def plan(net: Network) -> tuple[_Op, ...]:
    """Evaluation schedule for the non-input units, cached on the network."""
    cached = net.__dict__.get("_eval_plan")
    if cached is not None:
        return cached
    ops = []
    for j in net.topological_order:
        if j < net.n_inputs:
            continue
        unit = net.units[j]
        bias = None
        if unit.bias is not None:
            bias = (unit.bias.sign * unit.bias.numerator, unit.bias.denominator)
        terms = tuple(
            (src, c.recurrent, c.weight.sign * c.weight.numerator, c.weight.denominator)
            for src, c in net.incoming[j]
        )
        ops.append(_Op(j, ACTIVATION_CODES[unit.activation], unit.aggregation is Aggregation.PRODUCT, bias, terms))
    ops = tuple(ops)
    net.__dict__["_eval_plan"] = ops
    return ops


def sigmoid(x: float) -> float:
    try:
        e = math.exp(-x)
    except OverflowError:
        return 0.0
    return 1.0 / (1.0 + e)


def _activate(code: int, x):
    if code == 0:
        return x
    if not isinstance(x, float):
        return _activate_exact(code, x)
    if code == 1:
        return sigmoid(x)
    if code == 2:
        return 0.0 if x < 0 else x
    if code == 3:
        return x * x
    if code == 4:
        return float(math.floor(x)) if math.isfinite(x) else x
    if code == 5:
        return 1.0 if x > 0 else 0.0
    if math.isfinite(x):
        return x - 3.0 * float(math.floor(x / 3.0))
    return math.nan


def _activate_exact(code: int, x):
    # rational types (Fraction, gmpy2.mpq); sigmoid leaves them as a float
    if code == 1:
        return sigmoid(float(x))
    if code == 2:
        return x * 0 if x < 0 else x
    if code == 3:
        return x * x
    if code == 4:
        return x * 0 + math.floor(x)
    if code == 5:
        return x * 0 + (1 if x > 0 else 0)
    return x - 3 * math.floor(x / 3)


@dataclass(frozen=True)
class NetworkState:
    """Per-unit values from the previous time step."""

    prev_values: tuple

    def __len__(self) -> int:
        return len(self.prev_values)


@dataclass(frozen=True)
class StepTrace:
    time: int
    values: tuple
    raw_output: tuple
    distribution: tuple


def reset_state(net: Network, exact: bool = False) -> NetworkState:
    zero = Fraction(0) if exact else 0.0
    return NetworkState((zero,) * net.n_units)


def _step_values(ops, n_units: int, n_inputs: int, prev: Sequence, inputs: Sequence, zero) -> list:
    cur = [zero] * n_units
    cur[:n_inputs] = inputs
    for op in ops:
        if op.product:
            acc = None
            for src, rec, wn, wd in op.terms:
                term = (prev[src] if rec else cur[src]) * wn / wd
                acc = term if acc is None else acc * term
            if op.bias is not None:
                b = _const(op.bias, zero)
                acc = b if acc is None else acc * b
            if acc is None:
                acc = zero
        else:
            acc = _const(op.bias, zero) if op.bias is not None else zero
            for src, rec, wn, wd in op.terms:
                acc = acc + (prev[src] if rec else cur[src]) * wn / wd
        cur[op.unit] = _activate(op.code, acc)
    return cur


def _const(pair, zero):
    if isinstance(zero, float):
        return pair[0] / pair[1]
    return zero + type(zero)(pair[0], pair[1])


def step(net: Network, state: NetworkState, inputs: Sequence, exact: bool = False):
    """Advance one time step; returns ``(raw_output, next_state)``."""
    if len(inputs) != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {len(inputs)}")
    if len(state) != net.n_units:
        raise ValueError("state does not belong to this network")
    zero = Fraction(0) if exact else 0.0
    xs = [Fraction(x) if exact else float(x) for x in inputs]
    cur = _step_values(plan(net), net.n_units, net.n_inputs, state.prev_values, xs, zero)
    out = tuple(cur[net.n_inputs : net.n_inputs + net.n_outputs])
    return out, NetworkState(tuple(cur))


def _finite(values) -> bool:
    for v in values:
        if isinstance(v, float) and not math.isfinite(v):
            return False
    return True


def normalize_distribution(raw: Sequence[float], finite: bool = True) -> np.ndarray:
    """Zero the negatives and rescale to sum 1; all-zero (or poisoned) gives uniform."""
    r = np.asarray([float(x) for x in raw], dtype=float)
    n = len(r)
    if not finite or not np.all(np.isfinite(r)):
        return np.full(n, 1.0 / n)
    r = np.where(r < 0, 0.0, r)
    s = r.sum()
    if s == 0 or not math.isfinite(s):
        return np.full(n, 1.0 / n)
    return r / s


def clamp_probability(raw: float) -> float:
    """Addition-mode output: values at or below 0 mean 0, at or above 1 mean 1."""
    x = float(raw)
    if math.isnan(x):
        return 0.5
    return min(max(x, 0.0), 1.0)


def run_sequence(net: Network, inputs: Sequence[Sequence], exact: bool = False) -> list[tuple]:
    """Raw output vectors for every step, starting from the reset state."""
    return [t.raw_output for t in trace(net, inputs, exact=exact, mode=None)]


def trace(net: Network, inputs: Sequence[Sequence], exact: bool = False, mode: str | None = "lm") -> list[StepTrace]:
    """Like :func:`run_sequence` but keeps every unit value.

    ``mode`` selects how outputs become probabilities: ``"lm"`` normalizes,
    ``"clamp"`` clamps each output, ``None`` skips it.
    """
    state = reset_state(net, exact)
    rows = []
    for t, x in enumerate(inputs):
        raw, state = step(net, state, x, exact=exact)
        if mode == "lm":
            dist = tuple(normalize_distribution(raw, _finite(state.prev_values)))
        elif mode == "clamp":
            dist = tuple(clamp_probability(v) for v in raw)
        else:
            dist = ()
        rows.append(StepTrace(t, state.prev_values, raw, dist))
    return rows


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return repr(float(v))


def format_trace_table(net: Network, rows: Sequence[StepTrace], symbols: Sequence[str] | None = None) -> str:
    """Tab-separated table: time, input symbol, every unit value, the distribution."""
    header = ["t"]
    if symbols is not None:
        header.append("input")
    header += [f"u{i}" for i in range(net.n_units)]
    if rows and rows[0].distribution:
        header += [f"p{k}" for k in range(len(rows[0].distribution))]
    lines = ["\t".join(header)]
    for r in rows:
        cells = [str(r.time)]
        if symbols is not None:
            cells.append(symbols[r.time])
        cells += [_fmt(v) for v in r.values]
        cells += [repr(float(p)) for p in r.distribution]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# vectorized evaluation


def _activate_array(code: int, x: np.ndarray) -> np.ndarray:
    if code == 0:
        return x
    if code == 1:
        return 1.0 / (1.0 + np.exp(-x))
    if code == 2:
        return np.where(x < 0, 0.0, x)
    if code == 3:
        return x * x
    if code == 4:
        return np.floor(x)
    if code == 5:
        return np.where(x > 0, 1.0, 0.0)
    return x - 3.0 * np.floor(x / 3.0)


def simulate_batch(net: Network, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run ``inputs`` of shape (T, B, n_inputs) in lockstep from the reset state.

    Returns raw outputs (T, B, n_outputs) and a (T, B) mask that is False
    where any unit value was non-finite.
    """
    inputs = np.asarray(inputs, dtype=float)
    T, B, n_in = inputs.shape
    if n_in != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {n_in}")
    ops = plan(net)
    n = net.n_units
    out = np.empty((T, B, net.n_outputs))
    ok = np.empty((T, B), dtype=bool)
    prev = np.zeros((n, B))
    with np.errstate(all="ignore"):
        for t in range(T):
            cur = np.zeros((n, B))
            cur[:n_in] = inputs[t].T
            for op in ops:
                if op.product:
                    acc = None
                    for src, rec, wn, wd in op.terms:
                        term = (prev[src] if rec else cur[src]) * wn / wd
                        acc = term if acc is None else acc * term
                    if op.bias is not None:
                        b = op.bias[0] / op.bias[1]
                        acc = np.full(B, b) if acc is None else acc * b
                    if acc is None:
                        acc = np.zeros(B)
                else:
                    acc = np.full(B, op.bias[0] / op.bias[1]) if op.bias is not None else np.zeros(B)
                    for src, rec, wn, wd in op.terms:
                        acc = acc + (prev[src] if rec else cur[src]) * wn / wd
                cur[op.unit] = _activate_array(op.code, acc)
            out[t] = cur[n_in : n_in + net.n_outputs].T
            ok[t] = np.isfinite(cur).all(axis=0)
            prev = cur
    return out, ok


def _buckets(lengths: np.ndarray, max_cells: int = 4_000_000):
    order = np.argsort(lengths, kind="stable")
    i = 0
    n = len(order)
    while i < n:
        lo = lengths[order[i]]
        limit = max(lo + 8, int(lo * 1.25))
        j = i
        while j < n and lengths[order[j]] <= limit and (j - i + 1) * limit <= max_cells:
            j += 1
        j = max(j, i + 1)
        yield order[i:j]
        i = j


def simulate_sequences(net: Network, inputs: np.ndarray, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate concatenated sequences (rows of ``inputs`` split at ``offsets``).

    Each sequence starts from the reset state.  Returns flat raw outputs
    (S, n_outputs) and the per-step finiteness mask (S,).
    """
    offsets = np.asarray(offsets)
    S = int(offsets[-1])
    raw = np.empty((S, net.n_outputs))
    ok = np.empty(S, dtype=bool)
    lengths = np.diff(offsets)
    for idx in _buckets(lengths):
        lens = lengths[idx]
        T = int(lens.max())
        if T == 0:
            continue
        t = np.arange(T)[:, None]
        mask = t < lens[None, :]
        flat = (offsets[idx][None, :] + t)[mask]
        X = np.zeros((T, len(idx), net.n_inputs))
        X[mask] = inputs[flat]
        out, fin = simulate_batch(net, X)
        raw[flat] = out[mask]
        ok[flat] = fin[mask]
    return raw, ok


def normalize_rows(raw: np.ndarray, finite: np.ndarray | None = None) -> np.ndarray:
    """Row-wise :func:`normalize_distribution` for an (S, V) array."""
    raw = np.asarray(raw, dtype=float)
    S, V = raw.shape
    with np.errstate(all="ignore"):
        r = np.where(raw < 0, 0.0, raw)
        s = r.sum(axis=1)
        good = np.isfinite(r).all(axis=1) & (s > 0) & np.isfinite(s)
        if finite is not None:
            good &= finite
        out = np.full((S, V), 1.0 / V)
        out[good] = r[good] / s[good, None]
    return out
