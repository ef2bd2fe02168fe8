"""Production-rule probabilities estimated from hand-written programs."""
from __future__ import annotations

import logging
import os
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..lang import builtins
from ..reader import (Assume, BoolLit, Expr, IntLit, List as LList, Quote, RealLit, Symbol,
                      parse_program)
from .grammar import BOOL, REAL, RULES, TYPES

__all__ = ["read_manifest", "count_rules", "corpus_rule_weights", "load_corpus"]

log = logging.getLogger(__name__)

_BOOL_PRIMS = {"<", ">", "<=", ">=", "=", "not", "and", "or", "bernoulli", "flip"}


def read_manifest(path: str) -> Dict[str, str]:
    """``filename TAB family`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'filename<TAB>family'")
            out[parts[0].strip()] = parts[1].strip()
    return out


def load_corpus(directory: str, manifest: str = "manifest.tsv") -> List[Tuple[str, str]]:
    """(path, family) pairs for a corpus directory with a sidecar manifest."""
    families = read_manifest(os.path.join(directory, manifest))
    return [(os.path.join(directory, name), fam) for name, fam in sorted(families.items())]


class _Counter:
    def __init__(self):
        self.counts = {(r, t): 0 for r in RULES for t in TYPES}
        self.prims = builtins()

    def add(self, rule, t):
        self.counts[(rule, t)] += 1

    def visit(self, e: Expr, env: Dict[str, object], self_name: Optional[str]) -> str:
        """Count rules used by ``e``; returns its (approximate) type.

        ``env`` maps names to a type tag, or to ("proc", output type) for
        names bound to lambdas.
        """
        if isinstance(e, BoolLit):
            self.add(2, BOOL)
            return BOOL
        if isinstance(e, (RealLit, IntLit)):
            self.add(2, REAL)
            return REAL
        if isinstance(e, Quote):
            return REAL
        if isinstance(e, Symbol):
            t = env.get(e.name, REAL)
            t = t if t in TYPES else REAL
            self.add(1, t)
            return t
        if not e.items:
            return REAL
        head, *rest = e.items
        name = head.name if isinstance(head, Symbol) else None
        if name == "if":
            self.visit(rest[0], env, self_name)
            t = self.visit(rest[1], env, self_name)
            if len(rest) > 2:
                self.visit(rest[2], env, self_name)
            self.add(6, t)
            return t
        if name == "let":
            inner = dict(env)
            for b in rest[0].items:
                inner[b.items[0].name] = self.visit(b.items[1], env, self_name)
            t = REAL
            for form in rest[1:]:
                t = self._body_form(form, inner, self_name)
            self.add(5, t)
            return t
        if name == "begin":
            inner = dict(env)
            t = REAL
            for form in rest:
                t = self._body_form(form, inner, self_name)
            return t
        if name == "lambda":
            params = {p.name: REAL for p in rest[0].items}
            t = REAL
            for form in rest[1:]:
                t = self._body_form(form, {**env, **params}, self_name)
            return t
        if isinstance(head, LList) and head.items and head.items[0] == Symbol("lambda"):
            for a in rest:
                self.visit(a, env, self_name)
            t = self.visit(head, env, self_name)
            self.add(4, t)
            return t
        for a in rest:
            self.visit(a, env, self_name)
        bound = env.get(name)
        if isinstance(bound, tuple):
            rule = 7 if name == self_name else 4
            self.add(rule, bound[1])
            return bound[1]
        t = BOOL if name in _BOOL_PRIMS else REAL
        self.add(3, t)
        return t

    def _body_form(self, form, env, self_name) -> str:
        # (define name value) inside a body: a lambda defines a procedure, anything else acts as let
        if (isinstance(form, LList) and len(form.items) == 3
                and form.items[0] == Symbol("define") and isinstance(form.items[1], Symbol)):
            name, value = form.items[1].name, form.items[2]
            if isinstance(value, LList) and value.items and value.items[0] == Symbol("lambda"):
                env[name] = ("proc", REAL)
                t = self.visit(value, env, name)
                env[name] = ("proc", t)
            else:
                t = self.visit(value, env, self_name)
                env[name] = t
                self.add(5, REAL)
            return t
        return self.visit(form, env, self_name)


def count_rules(programs: Iterable[Sequence]) -> Dict[Tuple[int, str], int]:
    """Rule-occurrence counts over the ASSUME bodies of parsed programs."""
    c = _Counter()
    for directives in programs:
        env: Dict[str, object] = {}
        for d in directives:
            if isinstance(d, Assume):
                body = d.body
                is_lam = isinstance(body, LList) and body.items and body.items[0] == Symbol("lambda")
                if is_lam:
                    env[d.name] = ("proc", REAL)
                t = c.visit(body, env, d.name if is_lam else None)
                env[d.name] = ("proc", t) if is_lam else t
    return c.counts


def corpus_rule_weights(corpus_files: Sequence, exclude: Optional[str] = None,
                        smoothing: float = 1.0) -> Dict[Tuple[int, str], float]:
    """Dirichlet-smoothed rule frequencies per type.

    ``corpus_files`` holds ``(path, family)`` pairs (or bare paths, which are
    never excluded).  Programs whose family equals ``exclude`` are dropped.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    programs = []
    for item in corpus_files:
        path, family = (item, None) if isinstance(item, str) else item
        if exclude is not None and family == exclude:
            continue
        with open(path, encoding="utf-8") as fh:
            programs.append(parse_program(fh.read()))
    counts = count_rules(programs)
    weights = {}
    for t in TYPES:
        total = sum(counts[(r, t)] for r in RULES)
        if total == 0 and smoothing == 0:
            total, s = 0, 1.0
        else:
            s = smoothing
        for r in RULES:
            weights[(r, t)] = (counts[(r, t)] + s) / (total + len(RULES) * s)
    if not programs:
        log.warning("empty corpus after exclusion; using uniform rule weights")
    return weights
