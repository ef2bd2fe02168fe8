"""Execution traces: the address-keyed database of random choices.

A trace records every stochastic application of one program run together
with its value and log-probability.  Addresses are structural: the chain
of compound-call frames leading to the choice, each frame being
``(site ordinal, repetition count)``.  Re-running the program along the
same control path reproduces the same addresses, so a run can be replayed
against an older trace with one choice changed.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .distributions import DistributionKind, log_pdf, sample
from .lang import (Compound, SiteCounter, compile_expr, constant_value, format_value,
                   global_environment)
from .reader import Assume, Directive, Observe, Predict, parse_program, print_expr

__all__ = [
    "Program", "ChoiceRecord", "Trace", "TraceContext", "Proposal",
    "run_program", "replay", "trace_with_values", "propose", "latent_addresses",
    "format_address", "dump_trace",
]

NEG_INF = float("-inf")
Address = Tuple[Tuple[int, int], ...]
_UNSET = object()


class Program:
    """Directives compiled once, with globally unique site ordinals."""

    def __init__(self, directives: Sequence[Directive]):
        self.directives = tuple(directives)
        sites = SiteCounter()
        self.steps = []
        for d in self.directives:
            if isinstance(d, Assume):
                self.steps.append(("assume", d.name, compile_expr(d.body, sites), None))
            elif isinstance(d, Observe):
                self.steps.append(("observe", print_expr(d.body),
                                   compile_expr(d.body, sites), constant_value(d.value)))
            elif isinstance(d, Predict):
                self.steps.append(("predict", print_expr(d.body),
                                   compile_expr(d.body, sites), None))
            else:
                raise TypeError(f"not a directive: {d!r}")

    @classmethod
    def from_source(cls, text: str) -> "Program":
        return cls(parse_program(text))

    @property
    def predict_columns(self) -> List[str]:
        return [text for kind, text, _, _ in self.steps if kind == "predict"]

    @property
    def has_observes(self) -> bool:
        return any(kind == "observe" for kind, *_ in self.steps)


def as_program(p) -> Program:
    if isinstance(p, Program):
        return p
    if isinstance(p, str):
        return Program.from_source(p)
    return Program(p)


@dataclass(frozen=True)
class ChoiceRecord:
    addr: Address
    dist: DistributionKind
    value: object
    log_p: float
    observed: bool = False


@dataclass
class Trace:
    choices: Dict[Address, ChoiceRecord]
    log_weight: float
    predicts: List[Tuple[str, object]] = field(default_factory=list)

    def latents(self) -> List[Address]:
        return latent_addresses(self)

    def value(self, addr: Address):
        return self.choices[addr].value

    def recomputed_log_weight(self) -> float:
        return sum(log_pdf(r.dist, r.value) for r in self.choices.values())

    @property
    def predict_values(self) -> tuple:
        return tuple(v for _, v in self.predicts)


class TraceContext:
    """Evaluation context that records (or replays) addressed random choices.

    With ``base`` set the run is a replay: a choice whose address is in
    ``base`` takes the old value (its log-probability is re-evaluated under
    the current parameters), the ``target`` address takes ``proposal_value``,
    and anything else is sampled fresh.  ``forced`` pins fresh choices to
    given values, which is how specific traces are constructed in tests.
    """

    addressing = True
    max_calls = None

    def __init__(self, rng: Optional[random.Random] = None, base: Optional[Trace] = None,
                 target: Optional[Address] = None, proposal_value=_UNSET,
                 forced: Optional[Mapping[Address, object]] = None):
        self.rng = rng if rng is not None else random.Random()
        self.base = base
        self.target = target
        self.proposal_value = proposal_value
        self.forced = dict(forced) if forced else {}
        self.stack: Address = ()
        self.counts: Dict[tuple, int] = {}
        self.choices: Dict[Address, ChoiceRecord] = {}
        self.log_weight = 0.0
        self.log_fresh = 0.0
        self.fresh: set = set()
        self.reused: set = set()

    def _address(self, site: int) -> Address:
        key = (self.stack, site)
        k = self.counts.get(key, 0)
        self.counts[key] = k + 1
        return self.stack + ((site, k),)

    def enter(self, site: int) -> None:
        self.stack = self._address(site)

    def leave(self) -> None:
        self.stack = self.stack[:-1]

    def choose(self, site: int, kind: DistributionKind):
        addr = self._address(site)
        fresh = False
        if addr == self.target and self.proposal_value is not _UNSET:
            value = self.proposal_value
        elif addr in self.forced:
            value = self.forced[addr]
            fresh = True
        else:
            rec = self.base.choices.get(addr) if self.base is not None else None
            if rec is not None and not rec.observed and rec.dist.name == kind.name:
                value = rec.value
                self.reused.add(addr)
            else:
                value = sample(kind, self.rng)
                fresh = True
        lp = log_pdf(kind, value)
        if fresh:
            self.log_fresh += lp
            self.fresh.add(addr)
        self.choices[addr] = ChoiceRecord(addr, kind, value, lp, False)
        self.log_weight += lp
        return value

    def observe(self, site: int, kind: DistributionKind, value):
        addr = self._address(site)
        lp = log_pdf(kind, value)
        base_rec = self.base.choices.get(addr) if self.base is not None else None
        if base_rec is None or not base_rec.observed:
            self.fresh.add(addr)
        self.choices[addr] = ChoiceRecord(addr, kind, value, lp, True)
        self.log_weight += lp
        return value


def _execute(program: Program, ctx) -> Trace:
    env = global_environment()
    predicts = []
    for kind, label, node, value in program.steps:
        if kind == "assume":
            env.define(label, node.ev(env, ctx))
        elif kind == "observe":
            node.ev_observe(env, ctx, value)
        else:
            predicts.append((label, node.ev(env, ctx)))
    return Trace(ctx.choices, ctx.log_weight, predicts)


def run_program(program, ctx: Optional[TraceContext] = None) -> Trace:
    """Run every directive under ``ctx`` (a fresh recording context by default)."""
    program = as_program(program)
    if ctx is None:
        ctx = TraceContext()
    return _execute(program, ctx)


def replay(base: Trace, program, rng: Optional[random.Random] = None) -> Trace:
    """Re-run ``program`` reusing every value of ``base``."""
    return run_program(program, TraceContext(rng, base=base))


def trace_with_values(program, values: Mapping[Address, object],
                      rng: Optional[random.Random] = None) -> Trace:
    """Record a run with the choices at ``values``' addresses pinned."""
    return run_program(program, TraceContext(rng, forced=values))


def latent_addresses(t: Trace) -> List[Address]:
    """Unobserved choice addresses, sorted so that uniform selection is seedable."""
    return sorted(a for a, r in t.choices.items() if not r.observed)


@dataclass
class Proposal:
    trace: Trace
    log_q_fwd: float
    log_q_rev: float
    fresh: frozenset
    stale: frozenset

    @property
    def log_alpha_terms(self) -> float:
        return self.log_q_rev - self.log_q_fwd

    def __iter__(self):
        yield self.trace
        yield self.log_q_fwd
        yield self.log_q_rev


def propose(base: Trace, program, target: Address, rng: Optional[random.Random] = None,
            value=_UNSET, fresh: Optional[Mapping[Address, object]] = None,
            symmetric: bool = False) -> Proposal:
    """Single-site proposal: change the choice at ``target`` and re-execute.

    The new value is drawn from the choice's prior with the parameters it had
    in ``base`` unless ``value`` is given.  With ``symmetric`` the caller vouches
    that the local kernel is symmetric, so its density terms are omitted from
    both directions.
    """
    program = as_program(program)
    rng = rng if rng is not None else random.Random()
    rec = base.choices[target]
    if rec.observed:
        raise ValueError("observed choices cannot be proposed")
    if value is _UNSET:
        value = sample(rec.dist, rng)
    ctx = TraceContext(rng, base=base, target=target, proposal_value=value, forced=fresh)
    new = _execute(program, ctx)

    new_rec = new.choices[target]
    n_old = sum(1 for r in base.choices.values() if not r.observed)
    n_new = sum(1 for r in new.choices.values() if not r.observed)
    carried = ctx.reused | {target} | {a for a, r in new.choices.items()
                                       if r.observed and a not in ctx.fresh}
    stale = frozenset(a for a in base.choices if a not in carried)
    r_old = sum(base.choices[a].log_p for a in stale if not base.choices[a].observed)
    if symmetric:
        k_fwd = k_rev = 0.0
    else:
        k_fwd = log_pdf(rec.dist, value)
        k_rev = log_pdf(new_rec.dist, rec.value)
    log_q_fwd = -math.log(n_old) + k_fwd + ctx.log_fresh
    log_q_rev = -math.log(n_new) + k_rev + r_old
    return Proposal(new, log_q_fwd, log_q_rev, frozenset(ctx.fresh), stale)


def format_address(addr: Address) -> str:
    return "/".join(f"{s}.{k}" for s, k in addr)


def dump_trace(t: Trace) -> str:
    """One line per choice: address, distribution, value, log-probability, observed."""
    lines = []
    for rec in t.choices.values():
        lines.append("\t".join([
            format_address(rec.addr), str(rec.dist), format_value(rec.value),
            repr(rec.log_p), "true" if rec.observed else "false",
        ]))
    return "\n".join(lines)
