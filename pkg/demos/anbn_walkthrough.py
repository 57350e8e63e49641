"""Walk through the a^n b^n reference network.

Prints its genome, the step-by-step unit values on "#aaabbb", its MDL
score on a sampled corpus and a bounded check of the whole language.

    python3 demos/anbn_walkthrough.py
"""
import numpy as np

from mdlrnn.genome import encode_network, format_network
from mdlrnn.mdl import mdl_score
from mdlrnn.refnets import reference_network, verify_language
from mdlrnn.simulator import format_trace_table, trace
from mdlrnn.tasks import Corpus, TaskKind, generate_training

task = TaskKind.ANBN
net = reference_network(task)

print(format_network(net))
bits = encode_network(net)
print(f"{len(bits)} bits: {bits}\n")

# exact rationals everywhere except the sigmoid unit
seq = Corpus.from_strings(task, ["#aaabbb"])
print(format_trace_table(net, trace(net, seq.inputs.tolist(), exact=True), symbols=list("#aaabbb")))

corpus = generate_training(task, 100, 0.3, np.random.default_rng(0))
print("training corpus:", len(corpus), "strings, largest n =", corpus.meta["k"])
print("MDL:", mdl_score(net, corpus).report(), "\n")

print(verify_language(net, task, n_max=200, margin=1e-6))
