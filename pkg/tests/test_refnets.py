from pathlib import Path

import numpy as np
import pytest

from mdlrnn.genome import grammar_cost, read_genome_file
from mdlrnn.mdl import data_cost
from mdlrnn.metrics import categorical_accuracy
from mdlrnn.refnets import reference_network, reference_scheme, verify_language
from mdlrnn.tasks import Corpus, TaskKind, generate_training, language
from trace_tables import TABLES, anbn_rows, mismatches

FIXTURES = Path(__file__).parent / "fixtures" / "refs"
SIZES = [1, 2, 3, 7, 25]


@pytest.mark.parametrize("n", SIZES)
@pytest.mark.parametrize("task", [TaskKind.ANBN, TaskKind.ANBNCN, TaskKind.ANB2N])
def test_single_counter_trace_rows(task, n):
    assert mismatches(task, n) == []


@pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (1, 3), (4, 6), (9, 2)])
def test_anbmcnm_trace_rows(n, m):
    assert mismatches(TaskKind.ANBMCNM, n, m) == []


def test_table_check_notices_differences(monkeypatch):
    def off_by_one(n):
        string, rows = anbn_rows(n)
        rows[1][6] += 1
        return string, rows

    monkeypatch.setitem(TABLES, TaskKind.ANBN, off_by_one)
    assert [(t, u) for t, u, *_ in mismatches(TaskKind.ANBN, 2)] == [(1, 6)]


@pytest.mark.parametrize(
    "task,margin",
    [
        (TaskKind.ANBN, 1e-6),
        (TaskKind.ANBNCN, 1e-6),
        (TaskKind.ANB2N, 2e-3),
        (TaskKind.ANBMCNM, 3e-3),
        (TaskKind.DYCK1, 1e-6),
    ],
)
def test_verify_small_bound(task, margin):
    report = verify_language(reference_network(task), task, 40, margin)
    assert report.passed, str(report)
    assert report.worst_deviation < margin


def test_verify_reports_failures():
    # the sigmoid(-15) residue on P(#) exceeds a 1e-12 margin
    report = verify_language(reference_network(TaskKind.ANBN), TaskKind.ANBN, 5, 1e-12)
    assert not report.passed and report.first_failure is not None
    assert "FAIL" in str(report)


def test_verify_rejects_wrong_arity():
    with pytest.raises(ValueError):
        verify_language(reference_network(TaskKind.ANBN), TaskKind.DYCK2, 3, 1e-6)


def test_addition_reference_small_range():
    corpus = generate_training(TaskKind.ADDITION, 64)
    assert data_cost(reference_network(TaskKind.ADDITION), corpus) == 0.0


def test_dyck2_reference_sample():
    rng = np.random.default_rng(0)
    lang = language(TaskKind.DYCK2)
    corpus = Corpus.from_strings(TaskKind.DYCK2, [lang.sample_string(rng) for _ in range(2000)])
    assert categorical_accuracy(reference_network(TaskKind.DYCK2), corpus) == 1.0


@pytest.mark.parametrize("task", [t for t in TaskKind if t is not TaskKind.ANBNCNDN])
def test_fixture_genomes_match_builders(task):
    scheme = reference_scheme(task)
    net = read_genome_file(FIXTURES / f"{task.value}.genome", scheme)
    assert net == reference_network(task)
    assert grammar_cost(net, scheme) > 0
