import random

import pytest

from mdlrnn.genome import EXTENDED, STANDARD, Activation, Aggregation, encode_network
from mdlrnn.mdl import MdlScore, Scorer
from mdlrnn.search import (
    MUTATIONS,
    GAConfig,
    Island,
    apply_mutation,
    evolve_island,
    log_header,
    mutate,
    random_network,
    tournament_selection,
)
from mdlrnn.tasks import TaskKind, generate_training


def small(**kw):
    base = dict(population_size=20, generations=5, tournament_size=2)
    base.update(kw)
    return GAConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        GAConfig(tournament_size=1)
    with pytest.raises(ValueError):
        GAConfig(population_size=1)
    with pytest.raises(ValueError):
        GAConfig(mutation_weights={"teleport": 1})
    assert "change_aggregation" not in GAConfig().operators[0]
    assert "change_aggregation" in GAConfig(extended=True).operators[0]
    assert GAConfig(extended=True).scheme is EXTENDED and GAConfig().scheme is STANDARD


def test_random_networks_are_valid_and_connected():
    rng = random.Random(1)
    for _ in range(200):
        net = random_network(3, 3, small(), rng)
        assert net.hidden_indices == range(6, 6)
        for o in net.output_indices:
            assert any(src < 3 for src, _ in net.incoming[o])


@pytest.mark.parametrize("name", MUTATIONS)
def test_each_operator_yields_valid_networks(name):
    cfg = small(extended=True)
    rng = random.Random(MUTATIONS.index(name))
    net = random_network(3, 3, cfg, rng)
    for _ in range(30):
        net = mutate(net, cfg, rng)
    # make sure the removal operators have something to act on
    net = apply_mutation("add_unit", net, cfg, rng)
    net = apply_mutation("add_bias", net, cfg, rng)
    applied = 0
    for _ in range(50):
        child = apply_mutation(name, net, cfg, rng)
        if child is not None:
            applied += 1
            encode_network(child, EXTENDED)
            assert child != net or name == "mutate_weight"
    assert applied > 0


def test_mutations_respect_activation_subset():
    cfg = small(activations=(Activation.LINEAR, Activation.RELU))
    rng = random.Random(4)
    net = random_network(3, 3, cfg, rng)
    for _ in range(300):
        net = mutate(net, cfg, rng)
        assert {u.activation for u in net.units} <= {Activation.LINEAR, Activation.RELU}
        assert all(u.aggregation is Aggregation.SUM for u in net.units)


def test_weight_ranges():
    cfg = small(numerator_max=3, denominator_max=2)
    rng = random.Random(5)
    net = random_network(2, 2, cfg, rng)
    for _ in range(400):
        net = mutate(net, cfg, rng)
    for _, c in net.connections():
        assert c.weight.denominator <= max(2, cfg.init_denominator_max)


def test_tournament_picks_best_and_worst():
    scores = [MdlScore(g, 0.0) for g in (5, 3, 9, 4)]
    assert tournament_selection(scores, 2, random.Random(0), slots=[0, 2]) == (0, 2)
    assert tournament_selection(scores, 4, random.Random(0)) == (1, 2)
    with pytest.raises(ValueError):
        tournament_selection(scores, 5, random.Random(0))


def test_island_properties():
    corpus = generate_training(TaskKind.ANBN, 30, 0.3, 0)
    cfg = small(generations=15)
    scorer = Scorer(corpus)
    island = Island(corpus, cfg, scorer, seed=3)
    island.initialize()
    for _ in range(15):
        island.run_generation()
        assert len(island.population) == cfg.population_size
    totals = [s.total for s in island.history]
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    assert len(island.log_lines) == 16
    assert len(log_header().split("\t")) == len(island.log_lines[0].split("\t"))


def test_evolve_island_is_reproducible():
    corpus = generate_training(TaskKind.ANBN, 30, 0.3, 0)
    cfg = small(generations=8, seed=12)
    a_net, a_hist = evolve_island(corpus, cfg)
    b_net, b_hist = evolve_island(corpus, cfg)
    assert a_net == b_net
    assert [s.sort_key() for s in a_hist] == [s.sort_key() for s in b_hist]
