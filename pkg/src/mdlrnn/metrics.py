"""Evaluation measures: accuracies, cross-entropy and the oracle optimum.

Every measure takes a *predictor*: a :class:`~mdlrnn.genome.Network` or any
object with ``predict(corpus) -> (S, V) array`` of next-symbol
probabilities (for addition, columns are P(digit 0) and P(digit 1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .genome import Network
from .mdl import predicted_probabilities, surprisal_bits
from .tasks import Corpus, TaskKind

__all__ = [
    "OraclePredictor",
    "UniformPredictor",
    "predict",
    "deterministic_accuracy",
    "categorical_accuracy",
    "empty_prediction_steps",
    "cross_entropy_per_char",
    "optimal_cross_entropy",
    "addition_accuracy",
    "EvalReport",
    "evaluate",
]


class UndefinedMetric(ValueError):
    """The corpus has no steps the metric could be computed on."""


class OraclePredictor:
    """Predicts the true next-symbol distribution of the generating process."""

    def predict(self, corpus: Corpus) -> np.ndarray:
        return corpus.oracle


class UniformPredictor:
    def predict(self, corpus: Corpus) -> np.ndarray:
        V = corpus.oracle.shape[1]
        return np.full((corpus.n_steps, V), 1.0 / V)


def predict(predictor, corpus: Corpus) -> np.ndarray:
    if isinstance(predictor, Network):
        return predicted_probabilities(predictor, corpus)
    return np.asarray(predictor.predict(corpus), dtype=float)


def _strict_argmax(probs: np.ndarray) -> np.ndarray:
    """Row argmax, or -1 where the maximum is shared."""
    top = probs.max(axis=1, keepdims=True)
    ties = (probs == top).sum(axis=1) > 1
    arg = probs.argmax(axis=1)
    arg[ties] = -1
    return arg


def deterministic_accuracy(predictor, corpus: Corpus, probs: np.ndarray | None = None) -> float:
    """Argmax hits over steps whose next symbol is forced; ties are misses."""
    mask = corpus.deterministic_mask
    if not mask.any():
        raise UndefinedMetric("corpus has no deterministic steps")
    probs = predict(predictor, corpus) if probs is None else probs
    hits = _strict_argmax(probs[mask]) == corpus.targets[mask]
    return float(hits.mean())


def categorical_accuracy(predictor, corpus: Corpus, epsilon: float = 0.005, probs: np.ndarray | None = None) -> float:
    """Fraction of steps where no symbol outside the oracle support gets p >= epsilon."""
    if corpus.n_steps == 0:
        raise UndefinedMetric("empty corpus")
    probs = predict(predictor, corpus) if probs is None else probs
    outside = corpus.oracle == 0
    ok = ~np.any(outside & (probs >= epsilon), axis=1)
    return float(ok.mean())


def empty_prediction_steps(predictor, corpus: Corpus, epsilon: float = 0.005, probs: np.ndarray | None = None) -> int:
    """Steps where no symbol at all reaches epsilon (they pass vacuously)."""
    probs = predict(predictor, corpus) if probs is None else probs
    return int(np.sum(~np.any(probs >= epsilon, axis=1)))


def cross_entropy_per_char(predictor, corpus: Corpus, probs: np.ndarray | None = None) -> float:
    """Average surprisal in bits per step."""
    if corpus.n_steps == 0:
        raise UndefinedMetric("empty corpus")
    probs = predict(predictor, corpus) if probs is None else probs
    return surprisal_bits(probs, corpus.targets) / corpus.n_steps


def optimal_cross_entropy(corpus: Corpus) -> float:
    """Cross-entropy per step of the oracle predictor on this corpus."""
    return cross_entropy_per_char(OraclePredictor(), corpus)


def addition_accuracy(predictor, corpus: Corpus, per_bit: bool = False, probs: np.ndarray | None = None) -> float:
    """Fraction of pairs whose every sum digit is predicted (p > 0.5 means 1).

    ``per_bit`` scores digits individually instead.  A probability of
    exactly 0.5 is a miss either way.
    """
    if corpus.task is not TaskKind.ADDITION:
        raise ValueError("addition accuracy needs an addition corpus")
    if corpus.n_steps == 0:
        raise UndefinedMetric("empty corpus")
    probs = predict(predictor, corpus) if probs is None else probs
    p1 = probs[:, 1]
    correct = np.where(corpus.targets == 1, p1 > 0.5, p1 < 0.5)
    if per_bit:
        return float(correct.mean())
    wrong = np.add.reduceat((~correct).astype(np.int64), corpus.offsets[:-1])
    return float(np.mean(wrong == 0))


@dataclass
class EvalReport:
    task: str
    set_name: str
    cross_entropy: float
    optimal_cross_entropy: float
    deterministic_accuracy: float | None = None
    categorical_accuracy: float | None = None
    accuracy: float | None = None
    empty_steps: int = 0

    HEADER = "task\tset\tce_per_char\toptimal_ce_per_char\tdet_accuracy\tcat_accuracy\taccuracy"

    def tsv(self) -> str:
        cells = [
            self.task,
            self.set_name,
            _fmt(self.cross_entropy),
            _fmt(self.optimal_cross_entropy),
            _pct(self.deterministic_accuracy),
            _pct(self.categorical_accuracy),
            _pct(self.accuracy),
        ]
        return "\t".join(cells)


def _fmt(x: float) -> str:
    return "inf" if not math.isfinite(x) else f"{x:.4f}"


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.2f}%"


def evaluate(predictor, corpus: Corpus, set_name: str = "test", epsilon: float = 0.005) -> EvalReport:
    """Table-1 style row: the measures that apply to the corpus's task."""
    probs = predict(predictor, corpus)
    report = EvalReport(
        corpus.task.value,
        set_name,
        cross_entropy_per_char(None, corpus, probs=probs),
        optimal_cross_entropy(corpus),
    )
    if corpus.task is TaskKind.ADDITION:
        report.accuracy = addition_accuracy(None, corpus, probs=probs)
        return report
    if corpus.deterministic_mask.any():
        report.deterministic_accuracy = deterministic_accuracy(None, corpus, probs=probs)
    report.categorical_accuracy = categorical_accuracy(None, corpus, epsilon, probs=probs)
    report.empty_steps = empty_prediction_steps(None, corpus, epsilon, probs=probs)
    return report
