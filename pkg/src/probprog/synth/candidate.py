"""Turning derivations (or hand-written text) into callable samplers."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .. import safe
from ..lang import (Compound, EvalError, Environment, Primitive, SamplingContext, Stochastic,
                    apply_procedure, builtins, compile_expr, global_environment)
from ..reader import Assume, Expr, List as LList, Symbol, parse_expr, parse_program, print_expr
from .grammar import BOOL, Derivation, param_names

__all__ = ["CandidateSampler", "CandidateAbort", "compile_candidate", "compile_source",
           "candidate_environment", "CALL_CAP"]

CALL_CAP = 10_000


class CandidateAbort(RuntimeError):
    """A candidate call ran away (call cap, host stack) or failed at run time."""


def _sat(fn):
    def f(*args):
        return safe.saturate(fn(*args))
    return f


def _make_env() -> Environment:
    env = global_environment()
    base = builtins()
    for name in ("+", "-", "*", "dec", "inc", "cos", "sin", "safe-log", "safe-sqrt", "safe-div"):
        env.define(name, Primitive(name, _sat(base.lookup(name).fn)))
    env.define("exp", Primitive("exp", _sat(base.lookup("safe-exp").fn)))
    return env


_CANDIDATE_ENV = _make_env()


def candidate_environment() -> Environment:
    """Primitives as seen by candidates: every real result saturates to a finite float."""
    return Environment(parent=_CANDIDATE_ENV)


@dataclass
class CandidateSampler:
    """A compiled candidate.

    A single call never raises: a call that runs away (call cap, host
    stack) returns 0.0, or false for boolean candidates, and marks the
    context as aborted.  ``sample`` turns such a mark into ``CandidateAbort``
    so the scorer can reject the candidate outright.
    """

    params: tuple
    output_type: Optional[str]
    source_text: str
    procedure: Compound
    deterministic: bool = False

    def __call__(self, args: Sequence, rng: Optional[random.Random] = None):
        return self.call(args, self._context(rng))

    @staticmethod
    def _context(rng) -> SamplingContext:
        ctx = SamplingContext(rng or random.Random(), max_calls=CALL_CAP, saturate=True)
        ctx.abort_reason = None
        return ctx

    def call(self, args: Sequence, ctx: SamplingContext):
        ctx.calls = 0
        args = [a if isinstance(a, bool) else float(a) for a in args]
        try:
            return apply_procedure(self.procedure, args, ctx)
        except EvalError as e:
            reason = str(e)
        except RecursionError:
            reason = "host recursion limit reached"
        if getattr(ctx, "abort_reason", None) is None:
            ctx.abort_reason = reason
        return False if self.output_type == BOOL else 0.0

    def sample(self, n: int, args: Sequence = (), rng: Optional[random.Random] = None) -> list:
        """``n`` independent calls (the ``apply-n-times`` of the scoring loop)."""
        ctx = self._context(rng)
        if self.deterministic and n > 0:
            # no random choice is reachable, so every call gives the same value
            v = self.call(args, ctx)
            if ctx.abort_reason is not None:
                raise CandidateAbort(ctx.abort_reason)
            return [v] * n
        out = []
        for _ in range(n):
            out.append(self.call(args, ctx))
            if ctx.abort_reason is not None:
                # one runaway call already sinks the batch
                raise CandidateAbort(ctx.abort_reason)
        return out


def _wrap(body: Expr, n: int) -> Expr:
    params = LList(tuple(Symbol(p) for p in param_names(n)))
    return LList((Symbol("lambda"), params, body))


def _build(lam: Expr, input_types, output_type) -> CandidateSampler:
    proc = compile_expr(lam).ev(candidate_environment(), SamplingContext())
    if not isinstance(proc, Compound):
        raise TypeError("candidate source must be a lambda expression")
    if len(proc.params) != len(input_types):
        raise TypeError(f"candidate takes {len(proc.params)} parameter(s), "
                        f"expected {len(input_types)}")
    return CandidateSampler(tuple(input_types), output_type, print_expr(lam), proc,
                            not _may_sample(lam))


def _may_sample(e: Expr) -> bool:
    """True if any symbol in ``e`` could name a stochastic procedure.

    Shadowing is ignored, which errs on the side of "may sample".
    """
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, LList):
            stack.extend(x.items)
        elif isinstance(x, Symbol):
            try:
                v = _CANDIDATE_ENV.lookup(x.name)
            except KeyError:
                continue
            if isinstance(v, Stochastic) or (isinstance(v, Primitive) and v.needs_ctx):
                return True
    return False


def compile_candidate(d: Derivation, input_types: Optional[Sequence[str]] = None) -> CandidateSampler:
    """Wrap a derivation's body as ``(lambda (arg1 ... argN) body)``."""
    if not d.valid:
        raise ValueError("cannot compile an invalid derivation")
    types = tuple(input_types) if input_types is not None else d.input_types
    return _build(_wrap(d.rendered, len(types)), types, d.output_type)


def compile_source(text: str, input_types: Sequence[str] = (),
                   output_type: Optional[str] = None) -> CandidateSampler:
    """Compile hand-written code.

    ``text`` may be a lambda, a bare body (wrapped over ``arg1 ... argN``),
    or a program whose last ASSUME binds a lambda, as in the corpus files.
    """
    if text.lstrip().startswith("["):
        lams = [d.body for d in parse_program(text) if isinstance(d, Assume) and _is_lambda(d.body)]
        if not lams:
            raise ValueError("program text has no ASSUME binding a lambda")
        lam = lams[-1]
    else:
        e = parse_expr(text)
        lam = e if _is_lambda(e) else _wrap(e, len(input_types))
    return _build(lam, tuple(input_types), output_type)


def _is_lambda(e) -> bool:
    return isinstance(e, LList) and bool(e.items) and e.items[0] == Symbol("lambda")
