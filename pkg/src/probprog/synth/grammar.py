"""Typed stochastic grammar over candidate sampler bodies.

Generating a derivation is itself a small probabilistic program: every
decision (which rule, which variable, which cached constant, ...) is a
random choice stored under an address ``(node path, label)``.  Keeping the
choices explicit makes the prior recomputable and lets mutation reuse the
single-site regrow bookkeeping of trace MH.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..distributions import log_pdf, make_kind, sample, sample_poisson
from ..reader import BoolLit, Expr, IntLit, List as LList, RealLit, Symbol, print_expr

__all__ = [
    "REAL", "BOOL", "TYPES", "RULES", "RULE_NAMES", "PRIMITIVE_SIGNATURES",
    "DEFAULT_WHITELIST", "DEFAULT_RULE_WEIGHTS", "GrammarConfig", "Derivation",
    "ForeignDerivationError", "GrammarError", "productions", "derivation_log_prior",
    "mutate_derivation", "derivation_from_expr", "param_names",
]

NEG_INF = float("-inf")
REAL, BOOL = "real", "bool"
TYPES = (REAL, BOOL)

# 1 var, 2 const, 3 primitive, 4 compound procedure, 5 let, 6 if, 7 recur
RULES = (1, 2, 3, 4, 5, 6, 7)
RULE_NAMES = {1: "var", 2: "const", 3: "prim", 4: "proc", 5: "let", 6: "if", 7: "recur"}
TERMINAL_RULES = (1, 2)

PRIMITIVE_SIGNATURES: Dict[str, Tuple[Tuple[str, ...], str]] = {
    "+": ((REAL, REAL), REAL), "-": ((REAL, REAL), REAL), "*": ((REAL, REAL), REAL),
    "safe-div": ((REAL, REAL), REAL), "safe-uc": ((REAL, REAL), REAL),
    "safe-normal": ((REAL, REAL), REAL), "safe-beta": ((REAL, REAL), REAL),
    "safe-sqrt": ((REAL,), REAL), "safe-log": ((REAL,), REAL),
    "exp": ((REAL,), REAL), "cos": ((REAL,), REAL), "sin": ((REAL,), REAL),
    "dec": ((REAL,), REAL), "inc": ((REAL,), REAL),
    "safe-exp": ((REAL,), REAL),
    "<": ((REAL, REAL), BOOL), ">": ((REAL, REAL), BOOL),
    "not": ((BOOL,), BOOL), "and": ((BOOL, BOOL), BOOL), "or": ((BOOL, BOOL), BOOL),
}

DEFAULT_WHITELIST = frozenset(
    ["+", "-", "*", "safe-div", "safe-uc", "safe-sqrt", "safe-log", "exp", "cos",
     "dec", "inc", "<"])

_DEFAULT_BY_RULE = {1: 0.3, 2: 0.3, 3: 0.2, 4: 0.05, 5: 0.05, 6: 0.07, 7: 0.03}
DEFAULT_RULE_WEIGHTS = {(r, t): w for r, w in _DEFAULT_BY_RULE.items() for t in TYPES}

# base measure for new real constants: a three-way mixture
_CONST_COMPONENTS = (
    make_kind("normal", (0.0, 10.0)),
    make_kind("uniform-continuous", (-100.0, 100.0)),
    make_kind("uniform-discrete", (-1.0, 9.0)),
)
_COIN = make_kind("bernoulli", (0.5,))


class GrammarError(ValueError):
    pass


class ForeignDerivationError(GrammarError):
    """The derivation's choices are not a valid path through this grammar."""


@dataclass(frozen=True)
class GrammarConfig:
    rule_weights: Mapping[Tuple[int, str], float] = field(
        default_factory=lambda: dict(DEFAULT_RULE_WEIGHTS))
    max_depth: int = 12
    primitive_whitelist: frozenset = DEFAULT_WHITELIST
    dp_const_alpha: float = 1.0
    dp_proc_beta: float = 1.0
    arg_count_rate: float = 1.0
    recursion_allowed: bool = True

    def __post_init__(self):
        if self.max_depth < 1:
            raise GrammarError("max_depth must be at least 1")
        if not (self.dp_const_alpha > 0 and self.dp_proc_beta > 0 and self.arg_count_rate > 0):
            raise GrammarError("DP concentrations and the argument-count rate must be positive")
        unknown = set(self.primitive_whitelist) - set(PRIMITIVE_SIGNATURES)
        if unknown:
            raise GrammarError(f"no signature for primitive(s) {sorted(unknown)}")
        weights = dict(self.rule_weights)
        for key, w in weights.items():
            if key[0] not in RULES or key[1] not in TYPES:
                raise GrammarError(f"bad rule-weight key {key!r}")
            if not (w >= 0.0 and math.isfinite(w)):
                raise GrammarError(f"rule weight {key!r} must be finite and non-negative")
        for t in TYPES:
            if weights.get((2, t), 0.0) <= 0.0:
                raise GrammarError(f"the constant rule needs positive weight for type {t}")
        object.__setattr__(self, "rule_weights", weights)
        object.__setattr__(self, "primitive_whitelist", frozenset(self.primitive_whitelist))

    def weight(self, rule: int, t: str) -> float:
        return self.rule_weights.get((rule, t), 0.0)

    def primitives_for(self, t: str) -> List[str]:
        return sorted(p for p in self.primitive_whitelist if PRIMITIVE_SIGNATURES[p][1] == t)


def param_names(n: int, prefix: str = "arg") -> List[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


# -- choice bookkeeping ------------------------------------------------------------

_UNSET = object()


class _Invalid(Exception):
    """A reused choice has zero probability in its new context."""


class _Chooser:
    def __init__(self, rng, old=None, regrow=None, strict=False, guided=False):
        self.rng = rng
        self.old = old
        self.regrow = regrow
        self.strict = strict
        self.guided = guided
        self.values: Dict[tuple, object] = {}
        self.logps: Dict[tuple, float] = {}
        self.fresh: set = set()
        self.reused: set = set()
        self.log_prior = 0.0

    def _regrown(self, path) -> bool:
        p = self.regrow
        return p is not None and path[:len(p)] == p

    def pick(self, path, label, logp, draw, want=_UNSET):
        addr = (path, label)
        if want is not _UNSET:
            value = want
            self.fresh.add(addr)
        elif self.old is not None and addr in self.old and not self._regrown(path):
            value = self.old[addr]
            self.reused.add(addr)
        else:
            if self.strict:
                raise ForeignDerivationError(f"no recorded choice for {addr!r}")
            value = draw(self.rng)
            self.fresh.add(addr)
        lp = logp(value)
        if lp == NEG_INF:
            if self.strict or self.guided:
                raise ForeignDerivationError(f"choice {value!r} at {addr!r} has probability zero")
            raise _Invalid(addr)
        self.values[addr] = value
        self.logps[addr] = lp
        self.log_prior += lp
        return value


def _categorical(options: Sequence, weights: Sequence[float]):
    total = sum(weights)
    table = {o: w / total for o, w in zip(options, weights) if w > 0.0}

    def logp(v):
        p = table.get(v, 0.0)
        return math.log(p) if p > 0.0 else NEG_INF

    def draw(rng):
        return rng.choices(list(table), weights=list(table.values()))[0]

    return logp, draw


def _uniform(options: Sequence):
    return _categorical(options, [1.0] * len(options))


def _crp(counts: Sequence[int], conc: float):
    n = sum(counts)
    denom = n + conc

    def logp(v):
        if v == -1:
            return math.log(conc / denom)
        if isinstance(v, int) and 0 <= v < len(counts):
            return math.log(counts[v] / denom)
        return NEG_INF

    def draw(rng):
        u = rng.random() * denom
        acc = 0.0
        for i, c in enumerate(counts):
            acc += c
            if u < acc:
                return i
        return -1

    return logp, draw


def _from_kind(kind):
    return (lambda v: log_pdf(kind, v)), (lambda rng: sample(kind, rng))


# -- derivations -------------------------------------------------------------------

@dataclass
class _Proc:
    param_types: Tuple[str, ...]
    out: str
    body: Optional[Expr] = None
    count: int = 1


@dataclass
class Derivation:
    """A generated candidate body plus every choice that produced it."""

    input_types: Tuple[str, ...]
    output_type: str
    choices: Dict[tuple, object]
    choice_logps: Dict[tuple, float]
    log_prior: float
    nodes: List[Tuple[tuple, str, int]]
    rendered: Optional[Expr]
    const_tables: Dict[str, list] = field(default_factory=dict)
    proc_tables: Dict[str, list] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.rendered is not None and self.log_prior > NEG_INF

    @property
    def body_text(self) -> str:
        return print_expr(self.rendered)

    @property
    def source_text(self) -> str:
        params = " ".join(param_names(len(self.input_types)))
        return f"(lambda ({params}) {self.body_text})"

    def rule_counts(self) -> Dict[int, int]:
        out = {r: 0 for r in RULES}
        for _, _, r in self.nodes:
            out[r] += 1
        return out

    def __len__(self):
        return len(self.nodes)


def _invalid_derivation(input_types, output_type) -> Derivation:
    return Derivation(tuple(input_types), output_type, {}, {}, NEG_INF, [], None)


class _Generator:
    def __init__(self, cfg: GrammarConfig, chooser: _Chooser):
        self.cfg = cfg
        self.ch = chooser
        self.const_tables: Dict[str, list] = {t: [] for t in TYPES}
        self.proc_tables: Dict[str, List[_Proc]] = {t: [] for t in TYPES}
        self.nodes: List[Tuple[tuple, str, int]] = []

    # each guide argument is the expression this node must reproduce, or None
    def expr(self, path, t, env, depth, proc, guide=None):
        cfg, ch = self.cfg, self.ch
        vars_t = sorted({n for n, ty in _visible(env).items() if ty == t})
        if depth >= cfg.max_depth:
            candidates = [1, 2]
        else:
            candidates = list(RULES)
        applicable = []
        for r in candidates:
            if r == 1 and not vars_t:
                continue
            if r == 3 and not cfg.primitives_for(t):
                continue
            if r == 7 and not (cfg.recursion_allowed and proc is not None and proc.out == t):
                continue
            applicable.append(r)
        logp, draw = _categorical(applicable, [cfg.weight(r, t) for r in applicable])
        want = _UNSET if guide is None else _guide_rule(guide, t)
        rule = ch.pick(path, "rule", logp, draw, want)
        self.nodes.append((path, t, rule))
        return getattr(self, f"_rule{rule}")(path, t, env, depth, proc, guide)

    def _rule1(self, path, t, env, depth, proc, guide):
        names = sorted({n for n, ty in _visible(env).items() if ty == t})
        want = _UNSET if guide is None else guide.name
        return Symbol(self.ch.pick(path, "var", *_uniform(names), want))

    def _rule2(self, path, t, env, depth, proc, guide):
        tables = self.const_tables[t]
        logp, draw = _crp([c for _, c in tables], self.cfg.dp_const_alpha)
        want = _UNSET
        if guide is not None:
            gv = _literal_value(guide)
            want = next((i for i, (v, _) in enumerate(tables) if v == gv and
                         type(v) is type(gv)), -1)
        idx = self.ch.pick(path, "table", logp, draw, want)
        if idx >= 0:
            tables[idx][1] += 1
            value = tables[idx][0]
        elif t == BOOL:
            want = _UNSET if guide is None else _literal_value(guide)
            value = self.ch.pick(path, "value", *_from_kind(_COIN), want)
            tables.append([value, 1])
        else:
            want_c = want_v = _UNSET
            if guide is not None:
                want_v = _literal_value(guide)
                want_c = _component_for(want_v)
            comp = self.ch.pick(path, "component", *_uniform(range(len(_CONST_COMPONENTS))),
                                want_c)
            value = float(self.ch.pick(path, "value", *_from_kind(_CONST_COMPONENTS[comp]),
                                       want_v))
            tables.append([value, 1])
        return BoolLit(value) if t == BOOL else RealLit(value)

    def _rule3(self, path, t, env, depth, proc, guide):
        prims = self.cfg.primitives_for(t)
        want = _UNSET if guide is None else guide.items[0].name
        name = self.ch.pick(path, "prim", *_uniform(prims), want)
        arg_types = PRIMITIVE_SIGNATURES[name][0]
        if guide is not None and len(guide.items) - 1 != len(arg_types):
            raise ForeignDerivationError(f"{name} takes {len(arg_types)} argument(s)")
        args = [self.expr(path + (f"a{i}",), at, env, depth + 1, proc,
                          None if guide is None else guide.items[i + 1])
                for i, at in enumerate(arg_types)]
        return LList((Symbol(name), *args))

    def _rule4(self, path, t, env, depth, proc, guide):
        cfg, ch = self.cfg, self.ch
        tables = self.proc_tables[t]
        logp, draw = _crp([p.count for p in tables], cfg.dp_proc_beta)
        want = _UNSET
        if guide is not None:
            lam, gargs = guide.items[0], guide.items[1:]
            gparams, gbody = lam.items[1].items, lam.items[2]
            want = next((i for i, p in enumerate(tables)
                         if p.body == gbody and len(p.param_types) == len(gparams)), -1)
        idx = ch.pick(path, "ptable", logp, draw, want)
        if idx >= 0:
            target = tables[idx]
            target.count += 1
        else:
            want_n = _UNSET if guide is None else len(gparams)
            n = ch.pick(path, "nparams",
                        lambda v: log_pdf(make_kind("poisson", (cfg.arg_count_rate,)), v),
                        lambda rng: sample_poisson(cfg.arg_count_rate, rng), want_n)
            ptypes = []
            for i in range(int(n)):
                want_t = _UNSET if guide is None else _infer_param_type(gargs[i], env, proc, self)
                ptypes.append(ch.pick(path, ("ptype", i), *_uniform(TYPES), want_t))
            target = _Proc(tuple(ptypes), t)
            local = tuple(zip(param_names(len(ptypes), "p"), ptypes))
            target.body = self.expr(path + ("body",), t, local, depth + 1, target,
                                    None if guide is None else gbody)
            tables.append(target)
        if guide is not None and len(gargs) != len(target.param_types):
            raise ForeignDerivationError("procedure call has the wrong number of arguments")
        args = [self.expr(path + (f"a{i}",), pt, env, depth + 1, proc,
                          None if guide is None else gargs[i])
                for i, pt in enumerate(target.param_types)]
        params = LList(tuple(Symbol(n) for n in param_names(len(target.param_types), "p")))
        lam_expr = LList((Symbol("lambda"), params, target.body))
        return LList((lam_expr, *args))

    def _rule5(self, path, t, env, depth, proc, guide):
        name = f"x{depth}"
        gbind = gbody = None
        if guide is not None:
            (binding,) = guide.items[1].items
            if binding.items[0].name != name:
                raise ForeignDerivationError(f"let variable must be named {name}")
            gbind, gbody = binding.items[1], guide.items[2]
        bound = self.expr(path + ("bind",), REAL, env, depth + 1, proc, gbind)
        body = self.expr(path + ("body",), t, env + ((name, REAL),), depth + 1, proc, gbody)
        return LList((Symbol("let"), LList((LList((Symbol(name), bound)),)), body))

    def _rule6(self, path, t, env, depth, proc, guide):
        g = (None, None, None) if guide is None else guide.items[1:]
        c = self.expr(path + ("cond",), BOOL, env, depth + 1, proc, g[0])
        a = self.expr(path + ("then",), t, env, depth + 1, proc, g[1])
        b = self.expr(path + ("else",), t, env, depth + 1, proc, g[2])
        return LList((Symbol("if"), c, a, b))

    def _rule7(self, path, t, env, depth, proc, guide):
        if guide is not None and len(guide.items) - 1 != len(proc.param_types):
            raise ForeignDerivationError("recur has the wrong number of arguments")
        args = [self.expr(path + (f"a{i}",), pt, env, depth + 1, proc,
                          None if guide is None else guide.items[i + 1])
                for i, pt in enumerate(proc.param_types)]
        return LList((Symbol("recur"), *args))


def _visible(env) -> Dict[str, str]:
    out = {}
    for name, ty in env:
        out[name] = ty
    return out


def _literal_value(e):
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, (RealLit, IntLit)):
        return float(e.value)
    raise ForeignDerivationError(f"not a literal: {print_expr(e)}")


def _component_for(v) -> int:
    if isinstance(v, float) and v.is_integer() and -1.0 <= v <= 9.0:
        return 2
    if -100.0 <= v <= 100.0:
        return 1
    return 0


def _guide_rule(e, t) -> int:
    if isinstance(e, (RealLit, IntLit, BoolLit)):
        return 2
    if isinstance(e, Symbol):
        return 1
    if isinstance(e, LList) and e.items:
        head = e.items[0]
        if isinstance(head, Symbol):
            return {"if": 6, "let": 5, "recur": 7}.get(head.name, 3)
        if isinstance(head, LList) and head.items and head.items[0] == Symbol("lambda"):
            return 4
    raise ForeignDerivationError(f"expression outside the grammar: {print_expr(e)}")


def _infer_param_type(arg, env, proc, gen) -> str:
    from .typecheck import infer_type
    return infer_type(arg, dict(_visible(env)), proc)


def _run(input_types, output_type, cfg, chooser, guide=None) -> Derivation:
    gen = _Generator(cfg, chooser)
    env = tuple(zip(param_names(len(input_types)), input_types))
    try:
        rendered = gen.expr((), output_type, env, 0, None, guide)
    except _Invalid:
        return _invalid_derivation(input_types, output_type)
    return Derivation(
        tuple(input_types), output_type, chooser.values, chooser.logps, chooser.log_prior,
        gen.nodes, rendered,
        {t: [tuple(x) for x in v] for t, v in gen.const_tables.items()},
        {t: [(p.param_types, p.count) for p in v] for t, v in gen.proc_tables.items()},
    )


def _check_types(input_types, output_type):
    bad = [t for t in (*input_types, output_type) if t not in TYPES]
    if bad:
        raise GrammarError(f"unknown type tag(s) {bad}; expected real or bool")


def productions(input_types: Sequence[str], output_type: str, cfg: Optional[GrammarConfig] = None,
                rng: Optional[random.Random] = None) -> Derivation:
    """Draw a derivation of a body of ``output_type`` over parameters ``input_types``."""
    cfg = cfg or GrammarConfig()
    _check_types(input_types, output_type)
    return _run(tuple(input_types), output_type, cfg, _Chooser(rng or random.Random()))


def derivation_log_prior(d: Derivation, cfg: Optional[GrammarConfig] = None) -> float:
    """Replay every recorded choice under ``cfg`` and return the summed log-probability."""
    cfg = cfg or GrammarConfig()
    ch = _Chooser(None, old=d.choices, strict=True)
    again = _run(d.input_types, d.output_type, cfg, ch)
    if set(again.choices) != set(d.choices):
        raise ForeignDerivationError("derivation carries choices the grammar never makes")
    return again.log_prior


def derivation_from_expr(body: Expr, input_types: Sequence[str], output_type: str,
                         cfg: Optional[GrammarConfig] = None) -> Derivation:
    """Explain an existing body as a derivation (raises if it is outside the grammar)."""
    cfg = cfg or GrammarConfig()
    _check_types(input_types, output_type)
    ch = _Chooser(random.Random(0), guided=True)
    d = _run(tuple(input_types), output_type, cfg, ch, guide=body)
    if d.rendered != body:
        raise ForeignDerivationError("body does not render back to itself")
    return d


def mutate_derivation(d: Derivation, cfg: Optional[GrammarConfig] = None,
                      rng: Optional[random.Random] = None, node: Optional[int] = None):
    """Subtree regrow.  Returns ``(new, log_q_fwd, log_q_rev)``.

    One node is picked uniformly; every choice at or below it is redrawn
    from the grammar, and all other choices keep their values with
    probabilities re-evaluated in the new context.  A reused choice that has
    become impossible yields an invalid derivation (log_prior = -inf).
    """
    cfg = cfg or GrammarConfig()
    rng = rng or random.Random()
    if node is None:
        node = rng.randrange(len(d.nodes))
    path = d.nodes[node][0]
    ch = _Chooser(rng, old=d.choices, regrow=path)
    new = _run(d.input_types, d.output_type, cfg, ch)
    if not new.valid:
        return new, 0.0, NEG_INF
    stale = [a for a in d.choices if a not in ch.reused]
    log_q_fwd = -math.log(len(d.nodes)) + sum(new.choice_logps[a] for a in ch.fresh)
    log_q_rev = -math.log(len(new.nodes)) + sum(d.choice_logps[a] for a in stale)
    return new, log_q_fwd, log_q_rev
