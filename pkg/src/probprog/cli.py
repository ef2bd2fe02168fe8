"""Command-line front end: ``probprog {run,infer,enumerate,synth}``."""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import os
import random
import sys
from collections import Counter
from typing import List, Optional, Sequence

from .infer import InferenceError, MHConfig, SampleSet, mh_chain, posterior_enumerate, rejection_sample
from .lang import EvalError, UnsupportedObserveError, format_value
from .reader import ReaderError
from .score import synthesize
from .specfile import SpecError, load_spec
from .synth import compile_source
from .trace import Program

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_RUNTIME, EXIT_SPEC = 0, 1, 2, 3, 4
DEFAULT_SEED = 42
HIST_BINS = 20

log = logging.getLogger("probprog")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _non_negative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="probprog", description="Probabilistic programs: sampling, inference, synthesis.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, hist=True):
        sp.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: $PPL_SEED, else {DEFAULT_SEED})")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        if hist:
            sp.add_argument("--hist", action="store_true",
                            help="print a text histogram of each column to stderr")

    r = sub.add_parser("run", help="sample PREDICT values from the prior")
    r.add_argument("file")
    r.add_argument("--samples", type=_positive, default=1000)
    common(r)

    i = sub.add_parser("infer", help="posterior samples by rejection or MH")
    i.add_argument("file")
    i.add_argument("--method", choices=("mh", "rejection"), default="mh")
    i.add_argument("--samples", type=_positive, default=1000, help="kept samples (all chains)")
    i.add_argument("--burnin", type=_non_negative, default=None,
                   help="MH burn-in per chain (default: 20%% of the iterations)")
    i.add_argument("--thin", type=_positive, default=None,
                   help="MH thinning (default: 1, or 10 with observations)")
    i.add_argument("--chains", type=_positive, default=1)
    common(i)

    e = sub.add_parser("enumerate", help="exact posterior of a finite discrete program")
    e.add_argument("file")
    e.add_argument("--state-cap", type=_positive, default=100_000)
    common(e, hist=False)

    s = sub.add_parser("synth", help="search for a sampler program matching a spec")
    s.add_argument("spec")
    s.add_argument("--iters", type=_positive, default=None)
    s.add_argument("--chains", type=_positive, default=None)
    s.add_argument("--top", type=_positive, default=None)
    s.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: $PPL_SEED, else {DEFAULT_SEED})")
    s.add_argument("--out", default="synth-out", help="output directory")
    return p


def resolve_seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("PPL_SEED")
    if env is None or env.strip() == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"PPL_SEED must be an integer, got {env!r}") from None


def _load_program(path: str) -> Program:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror}") from None
    try:
        return Program.from_source(text)
    except ReaderError as e:
        raise ReaderError(f"{path}: {e}") from None
    except EvalError as e:
        # malformed special forms are caught while compiling, before anything runs
        raise ReaderError(f"{path}: {e}") from None


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_samples(samples: SampleSet, path: Optional[str]) -> None:
    if not samples.columns:
        # nothing to predict: an empty file
        with _output(path):
            return
    with _output(path) as fh:
        samples.to_csv(fh)


def text_histogram(values: Sequence, bins: int = HIST_BINS, width: int = 40) -> List[str]:
    """Fixed-width text histogram.

    Numeric columns with more than ``bins`` distinct values get ``bins``
    equal-width bins; anything else gets one row per distinct value.
    """
    if not values:
        return ["(no samples)"]
    numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values)
    rows = []
    if numeric and all(math.isfinite(v) for v in values) and len(set(values)) > bins:
        lo, hi = min(values), max(values)
        span = hi - lo
        counts = [0] * bins
        for v in values:
            j = int((v - lo) / span * bins) if span > 0 else 0
            counts[min(j, bins - 1)] += 1
        edges = [lo + span * j / bins for j in range(bins)]
        labels = [f"{x:>12.5g}" for x in edges]
    else:
        tally = Counter(format_value(v) for v in values)
        keys = sorted(tally, key=lambda k: (_sort_key(k), k))
        counts = [tally[k] for k in keys]
        labels = [f"{k:>12}" for k in keys]
    top = max(counts)
    for label, c in zip(labels, counts):
        bar = "#" * (round(c / top * width) if top else 0)
        rows.append(f"{label} | {bar:<{width}} {c}")
    return rows


def _sort_key(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.inf


def _print_hists(samples: SampleSet) -> None:
    for j, name in enumerate(samples.columns):
        print(f"== {name}", file=sys.stderr)
        for line in text_histogram(samples.column(j)):
            print(line, file=sys.stderr)


def cmd_run(args) -> int:
    program = _load_program(args.file)
    if program.has_observes:
        raise UsageError(f"{args.file} has OBSERVE directives; use `probprog infer` instead")
    seed = resolve_seed(args.seed)
    samples = rejection_sample(program, args.samples, seed=seed)
    _write_samples(samples, args.out)
    if args.hist:
        _print_hists(samples)
    return EXIT_OK


def _mh_config(args, seed: int, conditioned: bool) -> MHConfig:
    per_chain = -(-args.samples // args.chains)
    thin = args.thin if args.thin is not None else (10 if conditioned else 1)
    span = per_chain * thin
    burn = args.burnin if args.burnin is not None else math.ceil(span / 0.8) - span
    return MHConfig(iterations=burn + span, burn_in=burn, thin=thin, seed=seed, chains=args.chains)


def cmd_infer(args) -> int:
    program = _load_program(args.file)
    seed = resolve_seed(args.seed)
    if args.method == "rejection":
        samples = rejection_sample(program, args.samples, seed=seed)
    else:
        cfg = _mh_config(args, seed, program.has_observes)
        try:
            samples = mh_chain(program, cfg)
        except UnsupportedObserveError as e:
            raise UnsupportedObserveError(
                f"{e}; MH cannot condition on this observation, try --method rejection") from None
        samples.rows = samples.rows[:args.samples]
    _write_samples(samples, args.out)
    rate = samples.acceptance_rate
    print(f"method={args.method} kept={len(samples)} acceptance_rate={rate:.4f} seed={seed}",
          file=sys.stderr)
    if args.hist:
        _print_hists(samples)
    return EXIT_OK


def _posterior_json(program: Program, posterior) -> str:
    table = {",".join(format_value(v) for v in row): p for row, p in posterior.items()}
    return json.dumps({"columns": program.predict_columns,
                       "posterior": dict(sorted(table.items()))}, indent=2) + "\n"


def cmd_enumerate(args) -> int:
    program = _load_program(args.file)
    posterior = posterior_enumerate(program, state_cap=args.state_cap)
    with _output(args.out) as fh:
        fh.write(_posterior_json(program, posterior))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = load_spec(args.spec)
    search = spec.search
    if args.iters is not None:
        search.iterations = args.iters
    if args.chains is not None:
        search.chains = args.chains
    if args.top is not None:
        search.top = args.top
    search.seed = resolve_seed(args.seed)
    result = synthesize(spec.target, spec.grammar, search)
    os.makedirs(args.out, exist_ok=True)
    for n, entry in enumerate(result, 1):
        with open(os.path.join(args.out, f"rank_{n:02d}.ch"), "w", encoding="utf-8") as fh:
            fh.write(f"; rank {n}, mean score {entry.mean_score:.6g}\n{entry.source_text}\n")
    board = [dict(rank=n, **e.to_dict()) for n, e in enumerate(result, 1)]
    with open(os.path.join(args.out, "leaderboard.json"), "w", encoding="utf-8") as fh:
        json.dump({"spec": os.path.basename(args.spec), "seed": search.seed,
                   "acceptance_rates": result.acceptance_rates, "leaderboard": board}, fh, indent=2)
        fh.write("\n")
    _write_head_samples(result, spec, search.seed, os.path.join(args.out, "samples_rank_01.csv"))
    head = result.head
    print(f"head: {head.source_text}  mean score {head.mean_score:.4f}", file=sys.stderr)
    return EXIT_OK


def _write_head_samples(result, spec, seed: int, path: str) -> None:
    target = result.target
    head = compile_source(result.head.source_text, target.input_types, target.output_type)
    rng = random.Random(seed)
    params = spec.sample_params
    columns = [" ".join(["(program"] + [format_value(float(x)) for x in p]) + ")" for p in params]
    draws = [head.sample(target.J, p, rng) for p in params]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        SampleSet(columns, list(zip(*draws))).to_csv(fh)


_COMMANDS = {"run": cmd_run, "infer": cmd_infer, "enumerate": cmd_enumerate, "synth": cmd_synth}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"probprog: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"probprog: {e.filename}: {e.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except ReaderError as e:
        print(f"probprog: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except SpecError as e:
        print(f"probprog: spec error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except (EvalError, InferenceError, RecursionError, ValueError) as e:
        print(f"probprog: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
