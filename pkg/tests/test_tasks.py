import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdlrnn.tasks import (
    Corpus,
    InvalidPrefix,
    TaskKind,
    addition_sequence,
    deterministic_mask,
    generate_test,
    generate_training,
    in_language,
    language,
    optimal_entropy_rate,
    oracle_next,
    read_corpus,
    sample_geometric,
    write_corpus,
)


def test_oracle_rows():
    assert np.allclose(oracle_next(TaskKind.ANBN, "#"), [0, 1, 0])
    assert np.allclose(oracle_next(TaskKind.ANBN, "#aa"), [0, 0.7, 0.3])
    assert np.allclose(oracle_next(TaskKind.ANBN, "#aab"), [0, 0, 1])
    assert np.allclose(oracle_next(TaskKind.ANBN, "#aabb"), [1, 0, 0])
    assert np.allclose(oracle_next(TaskKind.ANB2N, "#abb"), [1, 0, 0])
    assert np.allclose(oracle_next(TaskKind.ANBMCNM, "#aab"), [0, 0, 0.7, 0.3])
    assert np.allclose(oracle_next(TaskKind.DYCK2, "#(["), [0, 0.15, 0.7, 0.15, 0])
    with pytest.raises(InvalidPrefix):
        oracle_next(TaskKind.ANBN, "#ba")


def test_membership():
    assert in_language(TaskKind.ANBNCN, "#aabbcc")
    assert not in_language(TaskKind.ANBNCN, "#aabbc")
    assert in_language(TaskKind.ANBMCNM, "#abbccc")
    assert in_language(TaskKind.ANB2N, "#aabbbb")
    assert in_language(TaskKind.DYCK2, "#([])()")
    assert not in_language(TaskKind.DYCK2, "#([)]")
    assert not in_language(TaskKind.ANBN, "#")


@pytest.mark.parametrize("task", [t for t in TaskKind if t.is_language])
def test_samples_are_members(task):
    rng = np.random.default_rng(0)
    lang = language(task)
    for _ in range(200):
        assert in_language(task, lang.sample_string(rng))


def test_deterministic_mask():
    # '#' forces a; a's are free; the b phase and the final step are forced
    assert deterministic_mask(TaskKind.ANBN, "#aabb").tolist() == [True, False, False, True, True]
    assert not deterministic_mask(TaskKind.DYCK1, "#[]").any()


def test_geometric_mean():
    rng = np.random.default_rng(5)
    draws = [sample_geometric(0.3, rng) for _ in range(20_000)]
    assert min(draws) >= 1
    assert abs(np.mean(draws) - 1 / 0.3) < 0.1


@given(st.integers(0, 5000), st.integers(0, 5000))
def test_addition_sequence(n, m):
    pairs, sums = addition_sequence(n, m)
    assert sum(b << i for i, b in enumerate(sums)) == n + m
    assert sum(a << i for i, (a, _) in enumerate(pairs)) == n
    assert sum(b << i for i, (_, b) in enumerate(pairs)) == m


def test_addition_corpus_matches_scalar_builder():
    c = Corpus.from_pairs([(3, 5), (0, 0), (7, 1)])
    for i, (n, m) in enumerate(c.items):
        x, y = c.sequence(i)
        pairs, sums = addition_sequence(n, m)
        assert x.tolist() == [list(p) for p in pairs]
        assert y.tolist() == sums


def test_training_corpus_is_seeded():
    a = generate_training(TaskKind.ANBN, 100, 0.3, 4)
    b = generate_training(TaskKind.ANBN, 100, 0.3, 4)
    assert a.items == b.items
    assert a.meta["k"] == max(s.count("a") for s in a.items)
    assert (a.targets[a.offsets[1:] - 1] == 0).all()


def test_addition_training_ranges():
    assert len(generate_training(TaskKind.ADDITION, 20)) == 400
    assert len(generate_training(TaskKind.ADDITION, 20, addition_range="inclusive")) == 441
    one = generate_training(TaskKind.ADDITION, 20, addition_range="one_based")
    assert min(min(p) for p in one.items) == 1


def test_test_corpora():
    t = generate_test(TaskKind.ANBN, 10)
    assert len(t) == 1001 and t.items[0] == "#" + "a" * 11 + "b" * 11
    t = generate_test(TaskKind.ANBMCNM, 4)
    assert len(t) == 2500
    t = generate_test(TaskKind.ADDITION, 3, span=5)
    assert t.items[0] == (4, 4) and len(t) == 25
    train = generate_training(TaskKind.DYCK1, 50, 0.3, 1)
    t = generate_test(TaskKind.DYCK1, train.meta["k"], 2, exclude=train.items, size=300)
    assert not set(t.items) & set(train.items) and len(t) == 300


def test_oracle_sums_to_one():
    c = generate_training(TaskKind.DYCK2, 100, 0.3, 3)
    assert np.allclose(c.oracle.sum(axis=1), 1)
    assert c.oracle[np.arange(c.n_steps), c.targets].min() > 0


def test_corpus_file_round_trip(tmp_path):
    for corpus in (generate_training(TaskKind.ANBNCN, 30, 0.3, 9), Corpus.from_pairs([(1, 2), (3, 4)], k=4)):
        path = tmp_path / "c.txt"
        write_corpus(path, corpus)
        back = read_corpus(path)
        assert back.items == corpus.items and back.task is corpus.task
        assert np.array_equal(back.inputs, corpus.inputs)


def test_dyck_entropy_rate():
    assert abs(optimal_entropy_rate(TaskKind.DYCK1) - 0.8813) < 1e-3
    assert abs(optimal_entropy_rate(TaskKind.DYCK2) - 1.1813) < 1e-3
