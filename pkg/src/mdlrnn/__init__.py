"""Minimum description length neuroevolution of small recurrent networks."""
from .genome import (
    EXTENDED,
    COMPACT,
    STANDARD,
    Activation,
    Aggregation,
    Connection,
    EncodingScheme,
    InvalidNetwork,
    MalformedEncoding,
    Network,
    RationalWeight,
    Unit,
    decode_network,
    encode_integer,
    encode_network,
    grammar_cost,
)
from .tasks import Corpus, TaskKind

__version__ = "0.1.0"

__all__ = [
    "EXTENDED",
    "COMPACT",
    "STANDARD",
    "Activation",
    "Aggregation",
    "Connection",
    "EncodingScheme",
    "InvalidNetwork",
    "MalformedEncoding",
    "Network",
    "RationalWeight",
    "Unit",
    "decode_network",
    "encode_integer",
    "encode_network",
    "grammar_cost",
    "Corpus",
    "TaskKind",
]
