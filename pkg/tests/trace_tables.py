"""Closed-form unit values of the counter references, row by row.

Each ``*_rows`` function returns one dict per step (unit index -> value);
sigmoid entries are floats, everything else exact fractions.
"""
from fractions import Fraction as F

from mdlrnn.refnets import reference_network
from mdlrnn.simulator import sigmoid, trace
from mdlrnn.tasks import Corpus, TaskKind


def anbn_rows(n):
    sg = sigmoid(-15.0)
    rows = [{6: F(0), 4: F(7, 3), 5: F(0), 3: sg}]
    rows += [{6: F(k, 2), 4: F(7, 3), 5: F(1), 3: sg} for k in range(1, n + 1)]
    rows += [{6: F(n - k, 2), 4: F(-2, 3), 5: F(1), 3: sg} for k in range(1, n)]
    rows.append({6: F(0), 4: F(-2, 3), 5: F(0), 3: sg})
    return "#" + "a" * n + "b" * n, rows


def anbncn_rows(n):
    sg = sigmoid(-15.0)
    rows = [{8: F(0), 9: F(-1, 3), 4: F(-1, 3), 5: F(1), 6: F(0), 7: sg}]
    rows += [{8: F(k, 2), 9: F(-(k + 1), 3), 4: F(-(k + 1), 3), 5: F(7, 3), 6: F(1), 7: sg} for k in range(1, n + 1)]
    rows += [
        {8: F(n - k, 2), 9: F(-(k + n + 1), 3), 4: F(-(k + n + 1), 3), 5: F(0), 6: F(1), 7: sg} for k in range(1, n)
    ]
    rows.append({8: F(0), 9: F(-(2 * n + 1), 3), 4: F(-(2 * n + 1), 3), 5: F(0), 6: F(0), 7: sg})
    rows += [
        {8: F(0), 9: 2 * (k - n - F(1, 2)) / 3, 4: F(2, 3) * (k - n + 1), 5: F(0), 6: F(0), 7: sg}
        for k in range(1, n)
    ]
    rows.append({8: F(0), 9: F(-1, 3), 4: F(2, 3), 5: F(0), 6: F(0), 7: sg})
    return "#" + "a" * n + "b" * n + "c" * n, rows


def anb2n_rows(n):
    rows = [{4: F(225), 5: sigmoid(-3.0), 3: F(1, 3)}]
    rows += [{4: F(1, 9), 5: sigmoid(-3.0), 3: F(1 - 2 * k, 3)} for k in range(1, n + 1)]
    rows.append({4: F(0), 5: sigmoid(-3.0), 3: F(2 - 2 * n, 3)})
    rows += [{4: F(0), 5: sigmoid(-10.0), 3: F(1 + k - 2 * n, 3)} for k in range(2, 2 * n + 1)]
    return "#" + "a" * n + "b" * (2 * n), rows


def anbmcnm_rows(n, m):
    rows = [{5: F(1, 3), 6: F(0), 7: F(0), 4: F(-3, 2)}]
    rows += [{5: F(1, 3), 6: F(1, 7), 7: F(0), 4: F(3 * (1 - k), 2)} for k in range(1, n + 1)]
    rows += [{5: F(-2, 3), 6: F(7, 3), 7: F(1), 4: F(3 * (1 - n - k), 2)} for k in range(1, m + 1)]
    rows += [{5: F(-2, 3), 6: F(0), 7: F(1, 225), 4: F(3 * (k + 1 - n - m), 2)} for k in range(1, n + m + 1)]
    for r in rows:
        # the memory unit holds a third of the P(#) unit
        r[8] = r[4] / 3
    return "#" + "a" * n + "b" * m + "c" * (n + m), rows


TABLES = {
    TaskKind.ANBN: anbn_rows,
    TaskKind.ANBNCN: anbncn_rows,
    TaskKind.ANB2N: anb2n_rows,
    TaskKind.ANBMCNM: anbmcnm_rows,
}


def mismatches(task, *sizes):
    """Cells where the exact trace differs from the closed form (empty when all agree)."""
    string, expected = TABLES[task](*sizes)
    corpus = Corpus.from_strings(task, [string])
    got = trace(reference_network(task), corpus.inputs.tolist(), exact=True, mode=None)
    if len(got) != len(expected):
        return [("length", len(got), len(expected))]
    bad = []
    for t, (row, want) in enumerate(zip(got, expected)):
        for unit, value in want.items():
            actual = row.values[unit]
            same_kind = isinstance(actual, float) == isinstance(value, float)
            if not same_kind or actual != value:
                bad.append((t, unit, actual, value))
    return bad
