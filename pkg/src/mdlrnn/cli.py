"""Command-line interface: ``python -m mdlrnn <command> ...`` or ``mdlrnn <command>``.

Exit codes: 0 success, 1 usage error, 2 data or verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .genome import (
    EncodingScheme,
    MalformedEncoding,
    Network,
    decode_network,
    encode_network,
    format_network,
    genome_file_bytes,
    parse_genome_bytes,
    parse_network,
    to_dot,
    write_genome_file,
)
from .islands import IslandConfig, run_islands
from .mdl import mdl_score
from .metrics import EvalReport, evaluate
from .refnets import VERIFICATION_MARGINS, reference_network, reference_scheme, verify_language
from .search import GAConfig, log_header
from .simulator import format_trace_table, trace
from .tasks import Corpus, TaskKind, addition_sequence, generate_test, generate_training, read_corpus, write_corpus

log = logging.getLogger("mdlrnn")

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2
WORKERS_ENV = "MDLRNN_WORKERS"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# config files

REQUIRED_KEYS = (
    "population_size",
    "generations",
    "tournament_size",
    "island_count",
    "migration_size",
    "migration_generations",
    "seed",
)
OPTIONAL_KEYS = {
    "extended": "false",
    "activations": "",
    "mutation_weights": "",
    "numerator_max": "9",
    "denominator_max": "9",
    "init_numerator_max": "4",
    "init_denominator_max": "4",
    "init_connection_p": "0.5",
    "max_retries": "20",
    "migration_minutes": "none",
}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def parse_config(text: str, overrides: dict[str, str] | None = None) -> IslandConfig:
    """Flat ``key = value`` file; ``#`` starts a comment.  Unknown keys are errors."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        values[key] = val
    values.update(overrides or {})
    unknown = set(values) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for key in REQUIRED_KEYS:
        if key not in values:
            raise UsageError(f"missing config key: {key}")
    merged = {**OPTIONAL_KEYS, **values}
    try:
        weights = {}
        for item in filter(None, (x.strip() for x in merged["mutation_weights"].split(","))):
            name, wt = item.split(":")
            weights[name.strip()] = float(wt)
        ga = GAConfig(
            population_size=int(merged["population_size"]),
            generations=int(merged["generations"]),
            tournament_size=int(merged["tournament_size"]),
            seed=int(merged["seed"]),
            extended=_bool(merged["extended"]),
            activations=tuple(filter(None, (x.strip() for x in merged["activations"].split(",")))),
            mutation_weights=weights,
            numerator_max=int(merged["numerator_max"]),
            denominator_max=int(merged["denominator_max"]),
            init_numerator_max=int(merged["init_numerator_max"]),
            init_denominator_max=int(merged["init_denominator_max"]),
            init_connection_p=float(merged["init_connection_p"]),
            max_retries=int(merged["max_retries"]),
        )
        minutes = merged["migration_minutes"].lower()
        return IslandConfig(
            ga=ga,
            island_count=int(merged["island_count"]),
            migration_size=int(merged["migration_size"]),
            migration_generations=int(merged["migration_generations"]),
            migration_minutes=None if minutes in ("", "none", "off") else float(minutes),
            base_seed=int(merged["seed"]),
        )
    except UsageError:
        raise
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config: {exc}") from None


# ---------------------------------------------------------------------------
# helpers


def _scheme(name: str | None, task: TaskKind | None = None) -> EncodingScheme:
    if name is None:
        return reference_scheme(task) if task is not None else EncodingScheme.named("standard")
    try:
        return EncodingScheme.named(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_genome(path: str, scheme: EncodingScheme) -> Network:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if data.lstrip().startswith(b"network"):
            net = parse_network(data.decode())
            scheme.check(net)
            return net
        return parse_genome_bytes(data, scheme)
    except (MalformedEncoding, ValueError) as exc:
        raise DataError(f"{path}: malformed genome: {exc}") from None


def _load_corpus(path: str) -> Corpus:
    try:
        return read_corpus(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _task(name: str) -> TaskKind:
    try:
        return TaskKind(name)
    except ValueError:
        raise UsageError(f"unknown task {name!r}; choose from {[t.value for t in TaskKind]}") from None


def _check_arity(net: Network, task: TaskKind) -> None:
    if (net.n_inputs, net.n_outputs) != (task.n_inputs, task.n_outputs):
        raise DataError(
            f"genome arity ({net.n_inputs}, {net.n_outputs}) does not match task {task.value} "
            f"({task.n_inputs}, {task.n_outputs})"
        )


# ---------------------------------------------------------------------------
# commands


def cmd_gen_corpus(args) -> int:
    task = _task(args.task)
    if args.size < 1:
        raise UsageError("--size must be at least 1")
    if not 0 < args.p < 1:
        raise UsageError("--p must lie strictly between 0 and 1")
    rng = np.random.default_rng(args.seed)
    if args.split == "train":
        corpus = generate_training(task, args.size, args.p, rng, addition_range=args.addition_range)
    else:
        if args.k is None:
            raise UsageError("--k is required for test corpora")
        exclude = ()
        if args.exclude is not None:
            exclude = set(_load_corpus(args.exclude).items)
        corpus = generate_test(task, args.k, rng, p=args.p, exclude=exclude, size=args.size)
    corpus.meta["seed"] = args.seed
    try:
        write_corpus(args.out, corpus)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc.strerror}") from None
    print(f"wrote {len(corpus)} sequences ({corpus.n_steps} steps) to {args.out}; K={corpus.meta.get('k')}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    corpus = _load_corpus(args.corpus)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {args.config}: {exc.strerror}") from None
    overrides = {}
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    config = parse_config(text, overrides)
    if corpus.task is TaskKind.DYCK2 and not config.ga.extended:
        log.warning("dyck2 corpus without the extended unit set")
    workers = args.workers or int(os.environ.get(WORKERS_ENV, "1"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoints"
    if config.migration_minutes is not None:
        print("note: wall-clock migration trigger enabled; this run is not reproducible")

    def on_round(islands):
        best = min(isl.best().score for isl in islands)
        log.info("generation %d best %s", islands[0].generation, best.report())
        _write_logs(out, islands)

    run = run_islands(corpus, config, workers=workers, checkpoint_dir=ckpt, resume=args.resume, on_round=on_round)
    _write_logs(out, run.islands)
    write_genome_file(out / "best.genome", run.best, config.ga.scheme)
    (out / "best.txt").write_text(format_network(run.best))
    report = run.best_score.report()
    (out / "report.txt").write_text(report + "\n")
    print(report)
    return EXIT_OK


def _write_logs(out: Path, islands) -> None:
    logs = out / "logs"
    logs.mkdir(exist_ok=True)
    for i, isl in enumerate(islands):
        (logs / f"island_{i:04d}.tsv").write_text(log_header() + "\n" + "\n".join(isl.log_lines) + "\n")


def cmd_eval(args) -> int:
    corpus = _load_corpus(args.corpus)
    net = _load_genome(args.genome, _scheme(args.scheme, corpus.task))
    _check_arity(net, corpus.task)
    report = evaluate(net, corpus, args.set_name, args.epsilon)
    score = mdl_score(net, corpus, _scheme(args.scheme, corpus.task))
    print(EvalReport.HEADER)
    print(report.tsv())
    if report.empty_steps:
        print(f"note: {report.empty_steps} steps had no symbol at or above epsilon")
    print(score.report())
    return EXIT_OK


def _sequence_inputs(task: TaskKind, text: str):
    if task is TaskKind.ADDITION:
        try:
            n, m = (int(x) for x in text.replace("+", ",").split(","))
        except ValueError:
            raise UsageError("addition sequences are given as n,m") from None
        pairs, _ = addition_sequence(n, m)
        return [list(p) for p in pairs], [f"{a}{b}" for a, b in pairs]
    vocab = task.vocabulary
    if not text.startswith("#"):
        text = "#" + text
    rows = []
    for s in text:
        if s not in vocab:
            raise UsageError(f"symbol {s!r} is not in the {task.value} vocabulary {vocab}")
        rows.append([1 if v == s else 0 for v in vocab])
    return rows, list(text)


def cmd_trace(args) -> int:
    task = _task(args.task)
    net = _load_genome(args.genome, _scheme(args.scheme, task))
    _check_arity(net, task)
    rows, symbols = _sequence_inputs(task, args.sequence)
    mode = "clamp" if task is TaskKind.ADDITION else "lm"
    sys.stdout.write(format_trace_table(net, trace(net, rows, exact=args.exact, mode=mode), symbols))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    net = _load_genome(args.genome, _scheme(args.scheme))
    sys.stdout.write(to_dot(net))
    return EXIT_OK


def cmd_encode(args) -> int:
    net = _load_genome(args.genome, _scheme(args.scheme))
    print(encode_network(net, _scheme(args.scheme)))
    return EXIT_OK


def cmd_decode(args) -> int:
    scheme = _scheme(args.scheme)
    bits = args.bits.strip()
    if set(bits) - {"0", "1"}:
        raise UsageError("bits must be a string of 0 and 1")
    try:
        net = decode_network(bits, args.inputs, args.outputs, scheme)
    except (MalformedEncoding, ValueError) as exc:
        raise DataError(f"malformed encoding: {exc}") from None
    if args.out:
        Path(args.out).write_bytes(genome_file_bytes(net, scheme))
    else:
        sys.stdout.write(format_network(net))
    return EXIT_OK


def cmd_verify_ref(args) -> int:
    from .metrics import addition_accuracy, categorical_accuracy
    from .mdl import data_cost

    task = _task(args.task)
    net = reference_network(task)
    if task is TaskKind.ADDITION:
        r = np.arange(args.n_max + 1)
        pairs = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)
        corpus = Corpus.from_pairs(pairs)
        acc = addition_accuracy(net, corpus)
        bits = data_cost(net, corpus)
        ok = acc == 1.0 and bits == 0.0
        summary = {"task": task.value, "n_max": args.n_max, "accuracy": acc, "data_bits": bits, "passed": ok}
        text = f"task=addition pairs=[0,{args.n_max}]^2 accuracy={100 * acc:.2f}% data_bits={bits}\nresult={'PASS' if ok else 'FAIL'}"
    elif task is TaskKind.DYCK2:
        corpus = generate_test(task, 0, np.random.default_rng(args.seed), size=args.samples)
        acc = categorical_accuracy(net, corpus)
        ok = acc == 1.0
        summary = {"task": task.value, "samples": args.samples, "categorical_accuracy": acc, "passed": ok}
        text = f"task=dyck2 samples={args.samples} categorical_accuracy={100 * acc:.2f}%\nresult={'PASS' if ok else 'FAIL'}"
    else:
        margin = VERIFICATION_MARGINS[task] if args.margin is None else args.margin
        report = verify_language(net, task, args.n_max, margin)
        ok = report.passed
        summary = report.summary()
        text = str(report)
    print(json.dumps(summary) if args.json else text)
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_export_refs(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for task in TaskKind:
        if task is TaskKind.ANBNCNDN:
            continue
        net = reference_network(task)
        write_genome_file(out / f"{task.value}.genome", net, reference_scheme(task))
        (out / f"{task.value}.txt").write_text(format_network(net))
        print(f"{task.value}: {out / (task.value + '.genome')}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdlrnn", description="MDL neuroevolution of recurrent networks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    tasks = [t.value for t in TaskKind]
    schemes = ["standard", "extended", "compact"]

    p = sub.add_parser("gen-corpus", help="generate a training or test corpus")
    p.add_argument("--task", required=True, choices=tasks)
    p.add_argument("--size", type=int, required=True, help="sequences (for addition: the bound K)")
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["train", "test"], default="train")
    p.add_argument("--k", type=int, help="largest training value (test split)")
    p.add_argument("--exclude", help="training corpus whose Dyck strings the test split must avoid")
    p.add_argument("--addition-range", choices=["below", "inclusive", "one_based"], default="below")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("evolve", help="run the island-model search")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("eval", help="evaluate a genome on a corpus")
    p.add_argument("--genome", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--scheme", choices=schemes)
    p.add_argument("--epsilon", type=float, default=0.005)
    p.add_argument("--set-name", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="print unit values step by step")
    p.add_argument("--genome", required=True)
    p.add_argument("--task", required=True, choices=tasks)
    p.add_argument("--sequence", required=True, help="symbols such as '#aabb', or 'n,m' for addition")
    p.add_argument("--scheme", choices=schemes)
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("export-dot", help="graphviz description of a genome")
    p.add_argument("--genome", required=True)
    p.add_argument("--scheme", choices=schemes)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("encode", help="print the bitstring of a genome")
    p.add_argument("--genome", required=True)
    p.add_argument("--scheme", choices=schemes)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="turn a bitstring into a genome")
    p.add_argument("--bits", required=True)
    p.add_argument("--inputs", type=int, required=True)
    p.add_argument("--outputs", type=int, required=True)
    p.add_argument("--scheme", choices=schemes)
    p.add_argument("--out", help="write a genome file instead of printing the text form")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("verify-ref", help="check a reference network against its task")
    p.add_argument("--task", required=True, choices=[t for t in tasks if t != "anbncndn"])
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--margin", type=float, help="allowed deviation (default: the task's proven bound)")
    p.add_argument("--samples", type=int, default=50_000, help="dyck2 sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify_ref)

    p = sub.add_parser("export-refs", help="write every reference network as genome files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_refs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mdlrnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"mdlrnn: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
