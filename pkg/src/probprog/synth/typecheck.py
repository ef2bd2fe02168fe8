"""Type checker for rendered candidate bodies.

Works on the printed-and-parsed expression only, without looking at the
derivation that produced it, so it can catch generator bugs.
"""
from __future__ import annotations

import itertools
from typing import Dict, Optional, Sequence

from ..reader import BoolLit, Expr, IntLit, List as LList, RealLit, Symbol, print_expr
from .grammar import BOOL, PRIMITIVE_SIGNATURES, REAL, TYPES, param_names

__all__ = ["TypeCheckError", "infer_type", "check_candidate"]


class TypeCheckError(TypeError):
    pass


class _Sig:
    def __init__(self, param_types, out):
        self.param_types = tuple(param_types)
        self.out = out


def _fail(msg, e):
    raise TypeCheckError(f"{msg} in {print_expr(e)}")


def infer_type(e: Expr, env: Dict[str, str], proc=None, expected: Optional[str] = None) -> str:
    """Type of ``e``; ``proc`` carries ``param_types``/``out`` for ``recur``.

    ``expected`` only matters for procedure bodies that never return (pure
    recursion), which are consistent with either output type.
    """
    if isinstance(e, BoolLit):
        return BOOL
    if isinstance(e, (RealLit, IntLit)):
        return REAL
    if isinstance(e, Symbol):
        if e.name not in env:
            _fail(f"unbound variable {e.name}", e)
        return env[e.name]
    if not isinstance(e, LList) or not e.items:
        _fail("unexpected form", e)
    head, *rest = e.items
    if isinstance(head, Symbol):
        if head.name == "if":
            if len(rest) != 3:
                _fail("if takes three parts", e)
            if infer_type(rest[0], env, proc, BOOL) != BOOL:
                _fail("if condition must be bool", e)
            a = infer_type(rest[1], env, proc, expected)
            b = infer_type(rest[2], env, proc, expected)
            if a != b:
                _fail("if branches disagree", e)
            return a
        if head.name == "let":
            if len(rest) != 2 or not isinstance(rest[0], LList):
                _fail("malformed let", e)
            inner = dict(env)
            for binding in rest[0].items:
                if (not isinstance(binding, LList) or len(binding.items) != 2
                        or not isinstance(binding.items[0], Symbol)):
                    _fail("malformed let binding", e)
                if infer_type(binding.items[1], env, proc, REAL) != REAL:
                    _fail("let binds reals only", e)
                inner[binding.items[0].name] = REAL
            return infer_type(rest[1], inner, proc, expected)
        if head.name == "recur":
            if proc is None:
                _fail("recur outside a procedure", e)
            _check_args(rest, proc.param_types, env, proc, e)
            return proc.out
        if head.name not in PRIMITIVE_SIGNATURES:
            _fail(f"unknown primitive {head.name}", e)
        arg_types, out = PRIMITIVE_SIGNATURES[head.name]
        _check_args(rest, arg_types, env, proc, e)
        return out
    if isinstance(head, LList) and len(head.items) == 3 and head.items[0] == Symbol("lambda"):
        params = head.items[1]
        if not isinstance(params, LList) or not all(isinstance(p, Symbol) for p in params.items):
            _fail("malformed lambda", e)
        if len(params.items) != len(rest):
            _fail("procedure applied to the wrong number of arguments", e)
        options = [_possible(a, env, proc) for a in rest]
        body = head.items[2]
        # neither the parameter types nor the output type are written down;
        # accept the first consistent assignment (recur must agree with it)
        errors = []
        for arg_types in itertools.product(*options):
            local = {p.name: t for p, t in zip(params.items, arg_types)}
            for out in ((expected,) if expected else TYPES):
                try:
                    if infer_type(body, local, _Sig(arg_types, out), out) == out:
                        return out
                except TypeCheckError as err:
                    errors.append(err)
        if errors:
            raise errors[0]
        _fail("procedure body has no consistent type", e)
    _fail("cannot apply this form", e)


def _possible(e, env, proc):
    out, first = [], None
    for t in TYPES:
        try:
            if infer_type(e, env, proc, t) == t:
                out.append(t)
        except TypeCheckError as err:
            first = first or err
    if not out:
        raise first if first else TypeCheckError(f"no type for {print_expr(e)}")
    return out


def _check_args(args, types, env, proc, e):
    if len(args) != len(types):
        _fail(f"expected {len(types)} argument(s), got {len(args)}", e)
    for a, t in zip(args, types):
        if infer_type(a, env, proc, t) != t:
            _fail(f"argument {print_expr(a)} is not {t}", e)


def check_candidate(body: Expr, input_types: Sequence[str], output_type: Optional[str] = None) -> str:
    """Type-check a candidate body against its parameters; returns its type."""
    env = dict(zip(param_names(len(input_types)), input_types))
    t = infer_type(body, env, None, output_type)
    if output_type is not None and t != output_type:
        raise TypeCheckError(f"body has type {t}, expected {output_type}")
    return t
