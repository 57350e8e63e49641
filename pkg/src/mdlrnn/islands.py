"""Island model: several GA islands with periodic ring migration.

Islands evolve independently between migration points.  At a migration
point island ``i`` runs ``migration_size`` disjoint tournaments; each
tournament's winner is copied to island ``(i + 1) % I`` and its loser is
overwritten by a migrant arriving from island ``i - 1``.  Island ``i`` is
seeded with ``base_seed + i``.

With ``workers > 1`` the stretches between migration points run in a
process pool; results do not depend on the number of workers.
"""
from __future__ import annotations

import json
import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .genome import decode_network
from .mdl import MdlScore, Scorer
from .search import GAConfig, Individual, Island, tournament_selection
from .tasks import Corpus

__all__ = [
    "IslandConfig",
    "desk_profile",
    "select_exchanges",
    "migrate",
    "run_islands",
    "IslandRun",
]


@dataclass
class IslandConfig:
    ga: GAConfig = field(default_factory=GAConfig)
    island_count: int = 250
    migration_size: int = 2
    migration_generations: int = 1_000
    # wall-clock trigger in minutes; None disables it (and keeps runs reproducible)
    migration_minutes: float | None = None
    base_seed: int = 0

    def __post_init__(self):
        if self.island_count < 1:
            raise ValueError("island_count must be >= 1")
        if self.migration_size < 1:
            raise ValueError("migration_size must be >= 1")
        if self.migration_generations < 1:
            raise ValueError("migration_generations must be >= 1")
        if self.migration_size * self.ga.tournament_size > self.ga.population_size:
            raise ValueError(
                "migration_size * tournament_size must not exceed population_size "
                "(migration tournaments are disjoint)"
            )

    def island_seed(self, i: int) -> int:
        return self.base_seed + i


def desk_profile(**overrides) -> IslandConfig:
    """20 islands of 100 for 2,000 generations, migrating every 100."""
    ga = GAConfig(population_size=100, generations=2_000, tournament_size=2)
    cfg = dict(ga=ga, island_count=20, migration_size=2, migration_generations=100)
    cfg.update(overrides)
    return IslandConfig(**cfg)


def select_exchanges(scores, m_size: int, t: int, rng: random.Random) -> list[tuple[int, int]]:
    """``m_size`` (migrant, loser) index pairs from disjoint tournaments."""
    if m_size * t > len(scores):
        raise ValueError("not enough individuals for disjoint migration tournaments")
    drawn = rng.sample(range(len(scores)), m_size * t)
    return [tournament_selection(scores, t, rng, drawn[k * t : (k + 1) * t]) for k in range(m_size)]


def migrate(population: list, incoming: list, m_size: int, rng: random.Random, t: int = 2, losers=None) -> list:
    """Replace ``m_size`` tournament losers with ``incoming``; returns the population.

    ``losers`` gives the slots to overwrite when they were already chosen
    (alongside the outgoing migrants); otherwise disjoint tournaments pick them.
    """
    if len(incoming) != m_size:
        raise ValueError(f"expected {m_size} incoming individuals, got {len(incoming)}")
    if m_size >= len(population):
        raise ValueError("migration_size must be smaller than the population")
    if losers is None:
        losers = [l for _, l in select_exchanges([ind.score for ind in population], m_size, t, rng)]
    for slot, ind in zip(losers, incoming):
        population[slot] = Individual(ind.net, ind.bits, ind.score)
    return population


# ---------------------------------------------------------------------------
# serializable island state


def _pack(island: Island) -> dict:
    return {
        "generation": island.generation,
        "genomes": [ind.bits for ind in island.population],
        "rng": _rng_to_json(island.rng.getstate()),
        "history": [[s.grammar_bits, _float_to_json(s.data_bits)] for s in island.history],
        "log": island.log_lines,
    }


def _unpack(island: Island, state: dict) -> None:
    task = island.corpus.task
    island.generation = state["generation"]
    island.population = [
        island.evaluate(decode_network(bits, task.n_inputs, task.n_outputs, island.scheme)) for bits in state["genomes"]
    ]
    island.rng.setstate(_rng_from_json(state["rng"]))
    island.history = [MdlScore(g, _float_from_json(d)) for g, d in state["history"]]
    island.log_lines = list(state["log"])


def _rng_to_json(state) -> list:
    version, internal, gauss = state
    return [version, list(internal), gauss]


def _rng_from_json(data) -> tuple:
    version, internal, gauss = data
    return (version, tuple(internal), gauss)


def _float_to_json(x: float):
    return x if math.isfinite(x) else "inf"


def _float_from_json(x) -> float:
    return math.inf if x == "inf" else float(x)


# worker-side cache: one scorer per process
_WORKER: dict = {}


def _worker_init(corpus: Corpus, ga: GAConfig) -> None:
    _WORKER["corpus"] = corpus
    _WORKER["ga"] = ga
    _WORKER["scorer"] = Scorer(corpus, ga.scheme)


def _worker_advance(state: dict, seed: int, generations: int) -> dict:
    island = Island(_WORKER["corpus"], _WORKER["ga"], _WORKER["scorer"], seed)
    _unpack(island, state)
    island.run(generations)
    return _pack(island)


@dataclass
class IslandRun:
    best: object
    best_score: MdlScore
    histories: list[list[MdlScore]]
    islands: list[Island]
    reproducible: bool

    @property
    def population(self) -> list[Individual]:
        return [ind for isl in self.islands for ind in isl.population]


def _checkpoint_path(directory: Path, i: int) -> Path:
    return directory / f"island_{i:04d}.json"


def write_checkpoints(directory, islands: list[Island], meta: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, isl in enumerate(islands):
        data = {"island": i, **meta, **_pack(isl)}
        tmp = _checkpoint_path(directory, i).with_suffix(".tmp")
        tmp.write_text(json.dumps(data))
        os.replace(tmp, _checkpoint_path(directory, i))


def read_checkpoints(directory, islands: list[Island]) -> dict:
    """Restore every island; returns the first checkpoint's metadata."""
    directory = Path(directory)
    meta = {}
    for i, isl in enumerate(islands):
        path = _checkpoint_path(directory, i)
        if not path.exists():
            raise FileNotFoundError(f"missing checkpoint {path}")
        data = json.loads(path.read_text())
        _unpack(isl, data)
        if i == 0:
            meta = {k: v for k, v in data.items() if k not in ("genomes", "rng", "history", "log")}
    gens = {isl.generation for isl in islands}
    if len(gens) != 1:
        raise ValueError(f"checkpoints disagree on the generation: {sorted(gens)}")
    return meta


def run_islands(
    corpus: Corpus,
    config: IslandConfig,
    *,
    workers: int = 1,
    checkpoint_dir=None,
    resume: bool = False,
    on_round: Callable[[list[Island]], None] | None = None,
    on_migration: Callable[[int, list], None] | None = None,
) -> IslandRun:
    """Run all islands to ``config.ga.generations``; returns the global best.

    ``on_round`` is called after every stretch of generations;
    ``on_migration(generation, exchanges)`` receives, per island, the list of
    (migrant bits, loser slot) pairs just exchanged.
    """
    ga = config.ga
    scorer = Scorer(corpus, ga.scheme)
    islands = [Island(corpus, ga, scorer, config.island_seed(i)) for i in range(config.island_count)]
    last_migration_gen = 0
    if resume:
        last_migration_gen = read_checkpoints(checkpoint_dir, islands).get("last_migration", 0)
    else:
        for isl in islands:
            isl.initialize()
    meta = {"scheme": ga.scheme.name, "n_inputs": corpus.task.n_inputs, "n_outputs": corpus.task.n_outputs}
    reproducible = config.migration_minutes is None
    # wall-clock mode advances in short stretches so the trigger is noticed
    stretch = config.migration_generations if reproducible else max(1, min(10, config.migration_generations))
    last_migration_time = time.monotonic()

    def maybe_migrate():
        nonlocal last_migration_gen, last_migration_time
        gen = islands[0].generation
        due = gen - last_migration_gen >= config.migration_generations
        if not reproducible:
            due = due or (time.monotonic() - last_migration_time) / 60.0 >= config.migration_minutes
        if due and gen < ga.generations and len(islands) > 1:
            exchanges = _migrate_ring(islands, config)
            last_migration_gen, last_migration_time = gen, time.monotonic()
            if on_migration is not None:
                on_migration(gen, exchanges)

    # a run stopped exactly at a migration point still owes that migration
    if resume and reproducible:
        maybe_migrate()

    pool = None
    if workers > 1 and len(islands) > 1:
        pool = ProcessPoolExecutor(max_workers=min(workers, len(islands)), initializer=_worker_init, initargs=(corpus, ga))
    try:
        while islands[0].generation < ga.generations:
            gen = islands[0].generation
            next_stop = min(ga.generations, (gen // stretch + 1) * stretch)
            if reproducible:
                next_stop = min(ga.generations, (gen // config.migration_generations + 1) * config.migration_generations)
            todo = next_stop - gen
            if pool is None:
                for isl in islands:
                    isl.run(todo)
            else:
                futures = [
                    pool.submit(_worker_advance, _pack(isl), config.island_seed(i), todo) for i, isl in enumerate(islands)
                ]
                for isl, fut in zip(islands, futures):
                    _unpack(isl, fut.result())
            maybe_migrate()
            if checkpoint_dir is not None:
                write_checkpoints(checkpoint_dir, islands, {**meta, "last_migration": last_migration_gen})
            if on_round is not None:
                on_round(islands)
    finally:
        if pool is not None:
            pool.shutdown()

    best = min((isl.best() for isl in islands), key=lambda ind: ind.score.sort_key())
    return IslandRun(best.net, best.score, [isl.history for isl in islands], islands, reproducible)


def _migrate_ring(islands: list[Island], config: IslandConfig) -> list:
    picks = []
    for isl in islands:
        pairs = select_exchanges(isl.scores, config.migration_size, config.ga.tournament_size, isl.rng)
        migrants = [isl.population[w] for w, _ in pairs]
        picks.append((migrants, [l for _, l in pairs]))
    exchanges = []
    for i, isl in enumerate(islands):
        incoming = picks[i - 1][0]
        losers = picks[i][1]
        migrate(isl.population, incoming, config.migration_size, isl.rng, config.ga.tournament_size, losers)
        exchanges.append([(ind.bits, slot) for ind, slot in zip(incoming, losers)])
    return exchanges
