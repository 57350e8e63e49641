"""Single-island genetic algorithm: random initialization, mutation, tournaments.

Each generation performs ``population_size`` iterations of: draw a
tournament, mutate a copy of its winner, score the offspring and let it
replace the tournament's loser.  All randomness comes from one
:class:`random.Random`, so an island is reproducible from its seed.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

from .genome import (
    EXTENDED,
    STANDARD,
    Activation,
    Aggregation,
    Connection,
    EncodingScheme,
    Network,
    RationalWeight,
    Unit,
    encode_network,
)
from .mdl import MdlScore, Scorer
from .tasks import Corpus

__all__ = [
    "GAConfig",
    "MUTATIONS",
    "Individual",
    "random_network",
    "mutate",
    "tournament_selection",
    "Island",
    "evolve_island",
    "log_header",
]

MUTATIONS = (
    "add_unit",
    "remove_unit",
    "add_forward",
    "add_recurrent",
    "remove_connection",
    "add_bias",
    "remove_bias",
    "mutate_weight",
    "change_activation",
    "change_aggregation",
)


@dataclass
class GAConfig:
    population_size: int = 500
    generations: int = 25_000
    tournament_size: int = 2
    seed: int = 0
    extended: bool = False
    # empty means every activation the encoding scheme allows
    activations: tuple[Activation, ...] = ()
    # operator name -> relative weight; missing operators get weight 1
    mutation_weights: dict[str, float] = field(default_factory=dict)
    numerator_max: int = 9
    denominator_max: int = 9
    init_numerator_max: int = 4
    init_denominator_max: int = 4
    init_connection_p: float = 0.5
    max_retries: int = 20

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        if self.population_size < self.tournament_size:
            raise ValueError("population_size must be >= tournament_size")
        if self.denominator_max < 1 or self.init_denominator_max < 1:
            raise ValueError("denominator ranges must include 1")
        unknown = set(self.mutation_weights) - set(MUTATIONS)
        if unknown:
            raise ValueError(f"unknown mutation operators: {sorted(unknown)}")
        self.activations = tuple(Activation(a) for a in self.activations)
        for a in self.activations:
            self.scheme.activation_id(a)

    @property
    def scheme(self) -> EncodingScheme:
        return EXTENDED if self.extended else STANDARD

    @property
    def enabled_activations(self) -> tuple[Activation, ...]:
        return self.activations or self.scheme.activations

    @property
    def operators(self) -> tuple[tuple[str, ...], tuple[float, ...]]:
        names = [m for m in MUTATIONS if self.extended or m != "change_aggregation"]
        weights = [float(self.mutation_weights.get(m, 1.0)) for m in names]
        return tuple(names), tuple(weights)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class Individual:
    net: Network
    bits: str
    score: MdlScore


# ---------------------------------------------------------------------------
# random genomes


def _random_weight(rng: random.Random, num_max: int, den_max: int) -> RationalWeight:
    return RationalWeight(rng.choice((1, -1)), rng.randint(0, num_max), rng.randint(1, den_max))


def random_network(n_inputs: int, n_outputs: int, config: GAConfig, rng: random.Random) -> Network:
    """No hidden units; every output gets at least one connection from an input."""
    if n_inputs < 1 or n_outputs < 1:
        raise ValueError("arity must be positive")
    acts = config.enabled_activations
    outgoing: list[list[Connection]] = [[] for _ in range(n_inputs)]
    for o in range(n_inputs, n_inputs + n_outputs):
        linked = False
        for i in range(n_inputs):
            if rng.random() < config.init_connection_p:
                w = _random_weight(rng, config.init_numerator_max, config.init_denominator_max)
                outgoing[i].append(Connection(o, w, rng.random() < 0.5))
                linked = True
        if not linked:
            i = rng.randrange(n_inputs)
            w = _random_weight(rng, config.init_numerator_max, config.init_denominator_max)
            outgoing[i].append(Connection(o, w, rng.random() < 0.5))
    units = [Unit(outgoing=tuple(c)) for c in outgoing]
    units += [Unit(rng.choice(acts)) for _ in range(n_outputs)]
    return Network(n_inputs, n_outputs, tuple(units))


# ---------------------------------------------------------------------------
# mutation operators; each returns None when it cannot apply


def _with_outgoing(unit: Unit, outgoing) -> Unit:
    return Unit(unit.activation, unit.aggregation, unit.bias, tuple(outgoing))


def _rebuild(net: Network, units) -> Network:
    return Network(net.n_inputs, net.n_outputs, tuple(units))


def _reaches(net: Network, start: int, goal: int) -> bool:
    """Is there a forward path from ``start`` to ``goal``?"""
    stack, seen = [start], {start}
    while stack:
        u = stack.pop()
        if u == goal:
            return True
        for c in net.units[u].outgoing:
            if not c.recurrent and c.target not in seen:
                seen.add(c.target)
                stack.append(c.target)
    return False


def _add_unit(net: Network, cfg: GAConfig, rng: random.Random):
    conns = list(net.connections())
    new = net.n_units
    act = rng.choice(cfg.enabled_activations)
    units = list(net.units)
    if not conns:
        units.append(Unit(act))
        return _rebuild(net, units)
    src, c = rng.choice(conns)
    kept = [x for x in units[src].outgoing if x.key != c.key] + [Connection(new, RationalWeight(1, 1, 1), False)]
    units[src] = _with_outgoing(units[src], kept)
    units.append(Unit(act, outgoing=(Connection(c.target, c.weight, c.recurrent),)))
    return _rebuild(net, units)


def _remove_unit(net: Network, cfg: GAConfig, rng: random.Random):
    hidden = list(net.hidden_indices)
    if not hidden:
        return None
    h = rng.choice(hidden)
    units = []
    for i, u in enumerate(net.units):
        if i == h:
            continue
        out = [
            Connection(c.target - (c.target > h), c.weight, c.recurrent) for c in u.outgoing if c.target != h
        ]
        units.append(_with_outgoing(u, out))
    return _rebuild(net, units)


def _add_connection(net: Network, cfg: GAConfig, rng: random.Random, recurrent: bool):
    src = rng.randrange(net.n_units)
    tgt = rng.randrange(net.n_inputs, net.n_units)
    if any(c.key == (tgt, recurrent) for c in net.units[src].outgoing):
        return None
    if not recurrent and (src == tgt or _reaches(net, tgt, src)):
        return None
    w = _random_weight(rng, cfg.init_numerator_max, cfg.init_denominator_max)
    units = list(net.units)
    units[src] = _with_outgoing(units[src], units[src].outgoing + (Connection(tgt, w, recurrent),))
    return _rebuild(net, units)


def _remove_connection(net: Network, cfg: GAConfig, rng: random.Random):
    conns = list(net.connections())
    if not conns:
        return None
    src, c = rng.choice(conns)
    units = list(net.units)
    units[src] = _with_outgoing(units[src], [x for x in units[src].outgoing if x.key != c.key])
    return _rebuild(net, units)


def _add_bias(net: Network, cfg: GAConfig, rng: random.Random):
    if not cfg.scheme.biases:
        return None
    free = [i for i in range(net.n_inputs, net.n_units) if net.units[i].bias is None]
    if not free:
        return None
    i = rng.choice(free)
    u = net.units[i]
    w = _random_weight(rng, cfg.init_numerator_max, cfg.init_denominator_max)
    return net.replace_unit(i, Unit(u.activation, u.aggregation, w, u.outgoing))


def _remove_bias(net: Network, cfg: GAConfig, rng: random.Random):
    have = [i for i in range(net.n_inputs, net.n_units) if net.units[i].bias is not None]
    if not have:
        return None
    i = rng.choice(have)
    u = net.units[i]
    return net.replace_unit(i, Unit(u.activation, u.aggregation, None, u.outgoing))


def _tweak(w: RationalWeight, cfg: GAConfig, rng: random.Random) -> RationalWeight:
    part = rng.randrange(3)
    if part == 0:
        return RationalWeight(w.sign, rng.randint(0, cfg.numerator_max), w.denominator)
    if part == 1:
        return RationalWeight(w.sign, w.numerator, rng.randint(1, cfg.denominator_max))
    return -w


def _mutate_weight(net: Network, cfg: GAConfig, rng: random.Random):
    slots = [(i, None) for i, u in enumerate(net.units) if u.bias is not None]
    slots += [(src, c) for src, c in net.connections()]
    if not slots:
        return None
    i, c = rng.choice(slots)
    u = net.units[i]
    if c is None:
        return net.replace_unit(i, Unit(u.activation, u.aggregation, _tweak(u.bias, cfg, rng), u.outgoing))
    out = [Connection(x.target, _tweak(x.weight, cfg, rng), x.recurrent) if x.key == c.key else x for x in u.outgoing]
    return net.replace_unit(i, _with_outgoing(u, out))


def _change_activation(net: Network, cfg: GAConfig, rng: random.Random):
    if net.n_units == net.n_inputs:
        return None
    i = rng.randrange(net.n_inputs, net.n_units)
    u = net.units[i]
    choices = [a for a in cfg.enabled_activations if a is not u.activation]
    if not choices:
        return None
    return net.replace_unit(i, Unit(rng.choice(choices), u.aggregation, u.bias, u.outgoing))


def _change_aggregation(net: Network, cfg: GAConfig, rng: random.Random):
    if not cfg.extended or net.n_units == net.n_inputs:
        return None
    i = rng.randrange(net.n_inputs, net.n_units)
    u = net.units[i]
    agg = Aggregation.SUM if u.aggregation is Aggregation.PRODUCT else Aggregation.PRODUCT
    return net.replace_unit(i, Unit(u.activation, agg, u.bias, u.outgoing))


_OPERATORS: dict[str, Callable] = {
    "add_unit": _add_unit,
    "remove_unit": _remove_unit,
    "add_forward": lambda n, c, r: _add_connection(n, c, r, False),
    "add_recurrent": lambda n, c, r: _add_connection(n, c, r, True),
    "remove_connection": _remove_connection,
    "add_bias": _add_bias,
    "remove_bias": _remove_bias,
    "mutate_weight": _mutate_weight,
    "change_activation": _change_activation,
    "change_aggregation": _change_aggregation,
}


def apply_mutation(name: str, net: Network, config: GAConfig, rng: random.Random) -> Network | None:
    """Apply one named operator; None if it has nothing to act on."""
    return _OPERATORS[name](net, config, rng)


def mutate(net: Network, config: GAConfig, rng: random.Random) -> Network:
    """One mutation; after ``max_retries`` infeasible draws the parent is returned."""
    names, weights = config.operators
    for _ in range(config.max_retries):
        name = rng.choices(names, weights)[0]
        child = _OPERATORS[name](net, config, rng)
        if child is not None:
            return child
    return net


# ---------------------------------------------------------------------------
# selection and the island loop


def tournament_selection(scores: Sequence[MdlScore], t: int, rng: random.Random, slots: Sequence[int] | None = None):
    """Indices ``(winner, loser)`` of ``t`` distinct individuals.

    ``slots`` fixes the tournament members instead of drawing them.
    """
    if slots is None:
        if len(scores) < t:
            raise ValueError(f"population of {len(scores)} is smaller than the tournament size {t}")
        slots = rng.sample(range(len(scores)), t)
    ranked = sorted(slots, key=lambda i: scores[i].sort_key())
    return ranked[0], ranked[-1]


def log_header() -> str:
    return "generation\tbest_total\tbest_G\tbest_DG\tmean_total"


def _mean_total(pop: Sequence[Individual]) -> float:
    finite = [ind.score.total for ind in pop if ind.score.finite]
    return math.fsum(finite) / len(finite) if finite else math.inf


class Island:
    """State of one island: population, random generator, generation count."""

    def __init__(self, corpus: Corpus, config: GAConfig, scorer: Scorer | None = None, seed: int | None = None):
        self.corpus = corpus
        self.config = config
        self.scheme = config.scheme
        self.scorer = scorer if scorer is not None else Scorer(corpus, self.scheme)
        self.rng = random.Random(config.seed if seed is None else seed)
        self.generation = 0
        self.population: list[Individual] = []
        self.history: list[MdlScore] = []
        self.log_lines: list[str] = []

    def evaluate(self, net: Network) -> Individual:
        bits = encode_network(net, self.scheme)
        return Individual(net, bits, self.scorer.score(net, bits))

    def initialize(self) -> None:
        task = self.corpus.task
        self.population = [
            self.evaluate(random_network(task.n_inputs, task.n_outputs, self.config, self.rng))
            for _ in range(self.config.population_size)
        ]
        self._record()

    def best(self) -> Individual:
        return min(self.population, key=lambda ind: ind.score.sort_key())

    def _record(self) -> None:
        best = self.best().score
        self.history.append(best)
        self.log_lines.append(
            f"{self.generation}\t{best.total!r}\t{best.grammar_bits}\t{best.data_bits!r}\t{_mean_total(self.population)!r}"
        )

    @property
    def scores(self) -> list[MdlScore]:
        return [ind.score for ind in self.population]

    def step(self) -> None:
        """One iteration of select, mutate, score, replace."""
        pop = self.population
        w, l = tournament_selection([ind.score for ind in pop], self.config.tournament_size, self.rng)
        child = mutate(pop[w].net, self.config, self.rng)
        pop[l] = self.evaluate(child) if child is not pop[w].net else Individual(child, pop[w].bits, pop[w].score)

    def run_generation(self) -> None:
        for _ in range(self.config.population_size):
            self.step()
        self.generation += 1
        self._record()

    def run(self, generations: int) -> None:
        for _ in range(generations):
            self.run_generation()


def evolve_island(corpus: Corpus, config: GAConfig, scorer: Scorer | None = None):
    """Algorithm-1 loop; returns ``(best network, per-generation best scores)``.

    ``history[0]`` is the best of the initial population and ``history[g]``
    the best after generation ``g``.
    """
    island = Island(corpus, config, scorer)
    island.initialize()
    island.run(config.generations)
    return island.best().net, island.history
