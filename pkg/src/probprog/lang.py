"""Evaluator: environments, procedures, special forms and the primitive library.

Expressions are compiled once into small node objects (the classic
"analyze" step) and then executed many times.  Every application node gets
a site ordinal at compile time; the tracing machinery uses these ordinals
to give each random choice a structural address.

Stochastic applications never touch the random source directly: they go
through an evaluation context (``ctx.choose``), which is what lets the
inference engine record, replay and mutate executions.
"""
from __future__ import annotations

import itertools
import math
import operator
import random
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import safe
from .distributions import DistributionDomainError, DistributionKind, make_kind, sample
from .reader import (BoolLit, Expr, IntLit, List, Quote, RealLit, Symbol, parse_expr,
                     print_expr)

__all__ = [
    "EvalError", "UnboundSymbolError", "ArityError", "NotAProcedureError",
    "TypeMismatchError", "UnsupportedObserveError", "RecursionCapError",
    "Environment", "Compound", "Primitive", "Stochastic", "Sym",
    "SamplingContext", "SiteCounter", "compile_expr", "eval_expr", "apply_procedure",
    "global_environment", "builtins", "format_value",
]


class EvalError(RuntimeError):
    """Runtime failure; carries the printed form of the offending expression."""

    def __init__(self, message: str, expr: Optional[Expr] = None):
        self.expr = expr
        self.expr_text = print_expr(expr) if expr is not None else None
        if self.expr_text is not None:
            message = f"{message} in {self.expr_text}"
        super().__init__(message)


class UnboundSymbolError(EvalError):
    pass


class ArityError(EvalError):
    pass


class NotAProcedureError(EvalError):
    pass


class TypeMismatchError(EvalError):
    pass


class UnsupportedObserveError(EvalError):
    pass


class RecursionCapError(EvalError):
    pass


class Sym(str):
    """Runtime symbol value (the result of quoting a symbol)."""

    def __repr__(self):
        return f"Sym({str.__repr__(self)})"


class Environment:
    __slots__ = ("vars", "parent")

    def __init__(self, bindings=None, parent: Optional["Environment"] = None):
        self.vars = dict(bindings) if bindings else {}
        self.parent = parent

    def lookup(self, name: str):
        env = self
        while env is not None:
            v = env.vars
            if name in v:
                return v[name]
            env = env.parent
        raise KeyError(name)

    def define(self, name: str, value) -> None:
        self.vars[name] = value

    def __contains__(self, name):
        try:
            self.lookup(name)
        except KeyError:
            return False
        return True


@dataclass(eq=False)
class Compound:
    params: tuple
    body: "Node"
    env: Environment
    source: Optional[Expr] = None

    def __repr__(self):
        return f"<compound ({' '.join(self.params)})>"


@dataclass(eq=False)
class Primitive:
    name: str
    fn: Callable
    needs_ctx: bool = False

    def __repr__(self):
        return f"<primitive {self.name}>"


@dataclass(eq=False)
class Stochastic:
    """A stochastic primitive.  ``transform`` maps raw args to (family, params),
    or to (None, value) for a deterministic degenerate case."""

    name: str
    family: str
    transform: Optional[Callable] = None

    def kind(self, args: Sequence) -> tuple:
        if self.transform is None:
            return make_kind(self.family, args), None
        fam, params = _apply_transform(self.transform, args, self.name)
        if fam is None:
            return None, params
        return make_kind(fam, params), None

    def __repr__(self):
        return f"<stochastic {self.name}>"


def _apply_transform(transform, args, name):
    for a in args:
        if isinstance(a, bool) or not isinstance(a, (int, float)):
            raise DistributionDomainError(f"{name} needs numeric arguments, got {a!r}")
    try:
        return transform(*args)
    except TypeError:
        raise DistributionDomainError(f"{name}: wrong number of arguments ({len(args)})") from None


PROCEDURE_TYPES = (Compound, Primitive, Stochastic)


# -- evaluation contexts ----------------------------------------------------------

class SamplingContext:
    """Plain forward sampling: no addresses, no bookkeeping.

    ``max_calls`` bounds the number of compound applications per evaluation,
    which is how runaway synthesised recursions are stopped.  With
    ``saturate`` set, stochastic draws are clamped to finite floats.
    """

    addressing = False

    def __init__(self, rng: Optional[random.Random] = None, max_calls: Optional[int] = None,
                 saturate: bool = False):
        self.rng = rng if rng is not None else random.Random()
        self.max_calls = max_calls
        self.calls = 0
        self.saturate = saturate

    def choose(self, site: int, kind: DistributionKind):
        x = sample(kind, self.rng)
        if self.saturate and not isinstance(x, bool):
            x = safe.saturate(x)
        return x

    def observe(self, site: int, kind: DistributionKind, value):
        raise UnsupportedObserveError("OBSERVE is not available in plain sampling")

    def enter(self, site: int) -> None:  # pragma: no cover - only used when addressing
        pass

    def leave(self) -> None:  # pragma: no cover
        pass


# -- compiled nodes ---------------------------------------------------------------

class SiteCounter:
    """Hands out application-site ordinals in compile order."""

    def __init__(self, start: int = 0):
        self._it = itertools.count(start)

    def __call__(self) -> int:
        return next(self._it)


class Node:
    __slots__ = ("expr",)

    def ev(self, env, ctx):
        raise NotImplementedError

    def ev_observe(self, env, ctx, value):
        raise UnsupportedObserveError(
            "OBSERVE needs a stochastic application in tail position", self.expr)


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, expr, value):
        self.expr = expr
        self.value = value

    def ev(self, env, ctx):
        return self.value


class Var(Node):
    __slots__ = ("name",)

    def __init__(self, expr, name):
        self.expr = expr
        self.name = name

    def ev(self, env, ctx):
        try:
            return env.lookup(self.name)
        except KeyError:
            raise UnboundSymbolError(f"unbound symbol {self.name!r}", self.expr) from None


class If(Node):
    __slots__ = ("test", "then", "other")

    def __init__(self, expr, test, then, other):
        self.expr = expr
        self.test, self.then, self.other = test, then, other

    def _branch(self, env, ctx):
        c = self.test.ev(env, ctx)
        if c is True:
            return self.then
        if c is False:
            return self.other
        raise TypeMismatchError(f"if condition must be boolean, got {format_value(c)}",
                                self.expr)

    def ev(self, env, ctx):
        return self._branch(env, ctx).ev(env, ctx)

    def ev_observe(self, env, ctx, value):
        return self._branch(env, ctx).ev_observe(env, ctx, value)


class Lambda(Node):
    __slots__ = ("params", "body")

    def __init__(self, expr, params, body):
        self.expr = expr
        self.params, self.body = params, body

    def ev(self, env, ctx):
        return Compound(self.params, self.body, env, self.expr)


class Begin(Node):
    """Sequence with its own frame so that inner ``define``s stay local."""

    __slots__ = ("forms", "last")

    def __init__(self, expr, forms, last):
        self.expr = expr
        self.forms, self.last = forms, last

    def _run(self, env, ctx):
        frame = Environment(parent=env)
        for f in self.forms:
            f.ev(frame, ctx)
        return frame

    def ev(self, env, ctx):
        return self.last.ev(self._run(env, ctx), ctx)

    def ev_observe(self, env, ctx, value):
        return self.last.ev_observe(self._run(env, ctx), ctx, value)


class Define(Node):
    __slots__ = ("name", "value")

    def __init__(self, expr, name, value):
        self.expr = expr
        self.name, self.value = name, value

    def ev(self, env, ctx):
        env.define(self.name, self.value.ev(env, ctx))
        return None


class Let(Node):
    __slots__ = ("names", "values", "body")

    def __init__(self, expr, names, values, body):
        self.expr = expr
        self.names, self.values, self.body = names, values, body

    def _frame(self, env, ctx):
        return Environment({n: v.ev(env, ctx) for n, v in zip(self.names, self.values)}, env)

    def ev(self, env, ctx):
        return self.body.ev(self._frame(env, ctx), ctx)

    def ev_observe(self, env, ctx, value):
        return self.body.ev_observe(self._frame(env, ctx), ctx, value)


class App(Node):
    __slots__ = ("site", "op", "args")

    def __init__(self, expr, site, op, args):
        self.expr = expr
        self.site, self.op, self.args = site, op, args

    def ev(self, env, ctx):
        f = self.op.ev(env, ctx)
        args = [a.ev(env, ctx) for a in self.args]
        return apply_procedure(f, args, ctx, self.site, self.expr)

    def ev_observe(self, env, ctx, value):
        f = self.op.ev(env, ctx)
        args = [a.ev(env, ctx) for a in self.args]
        if isinstance(f, Stochastic):
            try:
                kind, point = f.kind(args)
            except DistributionDomainError as e:
                raise EvalError(str(e), self.expr) from None
            if kind is None:
                raise UnsupportedObserveError(
                    f"cannot observe degenerate {f.name}", self.expr)
            return ctx.observe(self.site, kind, value)
        if isinstance(f, Compound):
            env2 = _bind(f, args, self.expr, ctx)
            if ctx.addressing:
                ctx.enter(self.site)
                try:
                    return f.body.ev_observe(env2, ctx, value)
                finally:
                    ctx.leave()
            return f.body.ev_observe(env2, ctx, value)
        raise UnsupportedObserveError(
            "OBSERVE body must end in a stochastic application", self.expr)


def _bind(f: Compound, args, expr, ctx) -> Environment:
    if len(args) != len(f.params):
        raise ArityError(f"procedure expects {len(f.params)} argument(s), got {len(args)}", expr)
    if ctx.max_calls is not None:
        ctx.calls += 1
        if ctx.calls > ctx.max_calls:
            raise RecursionCapError(f"more than {ctx.max_calls} procedure calls", expr)
    env2 = Environment(zip(f.params, args), f.env)
    env2.vars["recur"] = f
    return env2


def apply_procedure(f, args, ctx, site: int = -1, expr: Optional[Expr] = None):
    """Apply any procedure value to already-evaluated arguments."""
    if isinstance(f, Primitive):
        try:
            if f.needs_ctx:
                return f.fn(ctx, *args)
            return f.fn(*args)
        except EvalError:
            raise
        except (TypeError, ValueError, ZeroDivisionError, OverflowError, IndexError) as e:
            raise TypeMismatchError(f"{f.name}: {e}", expr) from None
    if isinstance(f, Compound):
        env2 = _bind(f, args, expr, ctx)
        if ctx.addressing:
            ctx.enter(site)
            try:
                return f.body.ev(env2, ctx)
            finally:
                ctx.leave()
        return f.body.ev(env2, ctx)
    if isinstance(f, Stochastic):
        try:
            kind, point = f.kind(args)
        except DistributionDomainError as e:
            raise EvalError(str(e), expr) from None
        if kind is None:
            return point
        return ctx.choose(site, kind)
    raise NotAProcedureError(f"cannot apply {format_value(f)}", expr)


# -- compilation ------------------------------------------------------------------

_SPECIAL = {"if", "lambda", "let", "begin", "define", "quote"}


def _quote_value(e: Expr):
    if isinstance(e, RealLit):
        return float(e.value)
    if isinstance(e, IntLit):
        return float(e.value)
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Symbol):
        return Sym(e.name)
    if isinstance(e, Quote):
        return (Sym("quote"), _quote_value(e.inner))
    return tuple(_quote_value(i) for i in e.items)


def constant_value(e: Expr):
    """Runtime value of a literal or quoted constant (OBSERVE values)."""
    if isinstance(e, Quote):
        return _quote_value(e.inner)
    if isinstance(e, (RealLit, IntLit, BoolLit)):
        return _quote_value(e)
    raise EvalError("not a constant", e)


def _body(forms, expr, sites) -> Node:
    if not forms:
        raise EvalError("empty body", expr)
    nodes = [compile_expr(f, sites, allow_define=True) for f in forms]
    if len(nodes) == 1 and not isinstance(nodes[0], Define):
        return nodes[0]
    if isinstance(nodes[-1], Define):
        raise EvalError("body cannot end in define", expr)
    return Begin(expr, nodes[:-1], nodes[-1])


def compile_expr(e: Expr, sites: Optional[SiteCounter] = None, allow_define: bool = False) -> Node:
    """Compile an expression tree into executable nodes."""
    if sites is None:
        sites = SiteCounter()
    if isinstance(e, (RealLit, IntLit)):
        return Const(e, float(e.value))
    if isinstance(e, BoolLit):
        return Const(e, e.value)
    if isinstance(e, Symbol):
        return Var(e, e.name)
    if isinstance(e, Quote):
        return Const(e, _quote_value(e.inner))
    if not isinstance(e, List):
        raise TypeError(f"not an expression: {e!r}")
    items = e.items
    if not items:
        return Const(e, ())
    head = items[0]
    if isinstance(head, Symbol) and head.name in _SPECIAL:
        kw = head.name
        if kw == "quote":
            if len(items) != 2:
                raise EvalError("quote takes one expression", e)
            return Const(e, _quote_value(items[1]))
        if kw == "if":
            if len(items) != 4:
                raise EvalError("if needs a test and two branches", e)
            return If(e, compile_expr(items[1], sites), compile_expr(items[2], sites),
                      compile_expr(items[3], sites))
        if kw == "lambda":
            if len(items) < 3 or not isinstance(items[1], List):
                raise EvalError("lambda needs a parameter list and a body", e)
            params = []
            for p in items[1].items:
                if not isinstance(p, Symbol):
                    raise EvalError("lambda parameters must be symbols", e)
                params.append(p.name)
            return Lambda(e, tuple(params), _body(items[2:], e, sites))
        if kw == "let":
            if len(items) < 3 or not isinstance(items[1], List):
                raise EvalError("let needs a binding list and a body", e)
            names, values = [], []
            for b in items[1].items:
                if not (isinstance(b, List) and len(b.items) == 2
                        and isinstance(b.items[0], Symbol)):
                    raise EvalError("let bindings look like (name expr)", e)
                names.append(b.items[0].name)
                values.append(compile_expr(b.items[1], sites))
            return Let(e, tuple(names), tuple(values), _body(items[2:], e, sites))
        if kw == "begin":
            return _body(items[1:], e, sites)
        if kw == "define":
            if not allow_define:
                raise EvalError("define is only allowed inside begin or a body", e)
            if len(items) != 3 or not isinstance(items[1], Symbol):
                raise EvalError("define needs a name and an expression", e)
            return Define(e, items[1].name, compile_expr(items[2], sites))
    op = compile_expr(head, sites)
    args = tuple(compile_expr(a, sites) for a in items[1:])
    return App(e, sites(), op, args)


def eval_expr(e, env: Optional[Environment] = None, ctx=None):
    """Evaluate an expression (or its source text) in ``env``."""
    if isinstance(e, str):
        e = parse_expr(e)
    if env is None:
        env = global_environment()
    if ctx is None:
        ctx = SamplingContext()
    return compile_expr(e).ev(env, ctx)


# -- primitives -------------------------------------------------------------------

def _nums(args, name):
    for a in args:
        if isinstance(a, bool) or not isinstance(a, (int, float)):
            raise TypeError(f"expected numbers, got {format_value(a)}")
    return args


def _add(*args):
    total = 0.0
    for a in _nums(args, "+"):
        total += a
    return total


def _sub(*args):
    _nums(args, "-")
    if not args:
        raise TypeError("needs at least one argument")
    if len(args) == 1:
        return -float(args[0])
    out = float(args[0])
    for a in args[1:]:
        out -= a
    return out


def _mul(*args):
    out = 1.0
    for a in _nums(args, "*"):
        out *= a
    return out


def _div(a, b):
    _nums((a, b), "/")
    if b == 0:
        raise ZeroDivisionError("division by zero")
    return a / b


def _compare(op):
    def fn(a, b):
        _nums((a, b), "compare")
        return op(a, b)
    return fn


def _eq(*args):
    if len(args) < 2:
        raise TypeError("= needs at least two arguments")
    first = args[0]
    return all(first == a for a in args[1:])


def _unary(fn):
    def f(a):
        _nums((a,), "")
        return fn(a)
    return f


def _bool(x):
    if x is not True and x is not False:
        raise TypeError(f"expected boolean, got {format_value(x)}")
    return x


def _list_arg(xs):
    if not isinstance(xs, tuple):
        raise TypeError(f"expected a list, got {format_value(xs)}")
    return xs


def _stat(name):
    def fn(xs):
        from .score.stats import moments
        m = moments([float(x) for x in _list_arg(xs)])
        return {"mean": m.mean, "variance": m.variance, "skewness": m.skewness,
                "kurtosis": m.kurtosis}[name]
    return fn


def _apply_n_times(ctx, proc, n, args=()):
    _nums((n,), "apply-n-times")
    args = list(_list_arg(args))
    return tuple(apply_procedure(proc, args, ctx) for _ in range(int(n)))


def _first(xs):
    xs = _list_arg(xs)
    if not xs:
        raise IndexError("first of empty list")
    return xs[0]


def _det(name, fn, needs_ctx=False):
    return name, Primitive(name, fn, needs_ctx)


def _make_builtins() -> dict:
    table = dict([
        _det("+", _add), _det("-", _sub), _det("*", _mul), _det("/", _div),
        _det("<", _compare(operator.lt)), _det(">", _compare(operator.gt)),
        _det("<=", _compare(operator.le)), _det(">=", _compare(operator.ge)),
        _det("=", _eq),
        _det("dec", _unary(lambda a: a - 1.0)), _det("inc", _unary(lambda a: a + 1.0)),
        _det("exp", _unary(math.exp)), _det("log", _unary(math.log)),
        _det("cos", _unary(math.cos)), _det("sin", _unary(math.sin)),
        _det("sqrt", _unary(math.sqrt)), _det("abs", _unary(abs)),
        _det("not", lambda x: not _bool(x)),
        _det("and", lambda *xs: all(_bool(x) for x in xs)),
        _det("or", lambda *xs: any(_bool(x) for x in xs)),
        _det("list", lambda *xs: tuple(xs)),
        _det("first", _first),
        _det("rest", lambda xs: _list_arg(xs)[1:]),
        _det("count", lambda xs: float(len(_list_arg(xs)))),
        _det("mean", _stat("mean")), _det("variance", _stat("variance")),
        _det("skewness", _stat("skewness")), _det("kurtosis", _stat("kurtosis")),
        _det("apply-n-times", _apply_n_times, needs_ctx=True),
        _det("safe-log", _unary(safe.safe_log)),
        _det("safe-sqrt", _unary(safe.safe_sqrt)),
        _det("safe-exp", _unary(safe.safe_exp)),
        _det("safe-div", lambda a, b: safe.safe_div(*_nums((a, b), "safe-div"))),
    ])
    for fam in ("bernoulli", "flip", "normal", "gamma", "beta", "uniform-continuous",
                "uniform-discrete", "poisson"):
        table[fam] = Stochastic(fam, fam)
    table["safe-uc"] = Stochastic("safe-uc", "uniform-continuous", safe.safe_uc_params)
    table["safe-normal"] = Stochastic("safe-normal", "normal", safe.safe_normal_params)
    table["safe-beta"] = Stochastic("safe-beta", "beta", safe.safe_beta_params)
    return table


_BUILTINS = Environment(_make_builtins())


def builtins() -> Environment:
    """The shared, read-only primitive frame."""
    return _BUILTINS


def global_environment() -> Environment:
    """A fresh top-level frame on top of the primitives."""
    return Environment(parent=_BUILTINS)


# -- printing ---------------------------------------------------------------------

def format_value(v) -> str:
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, (int, float)):
        return repr(float(v))
    if isinstance(v, Sym):
        return str(v)
    if isinstance(v, tuple):
        return "(" + " ".join(format_value(x) for x in v) + ")"
    if v is None:
        return "nil"
    return repr(v)
