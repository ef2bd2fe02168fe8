"""JSON synthesis spec files (``"schema": 1``)."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import jsonschema

from .infer import MHConfig
from .score import GTestBernoulli, KSTwoSample, MomentsTarget, PosteriorCompile, SearchConfig
from .synth import (DEFAULT_RULE_WEIGHTS, DEFAULT_WHITELIST, PRIMITIVE_SIGNATURES, RULE_NAMES,
                    TYPES, GrammarConfig, GrammarError, corpus_rule_weights, load_corpus)

__all__ = ["SpecError", "SynthSpec", "SCHEMA", "load_spec", "parse_spec"]

_NUM = {"type": "number"}
_COUNT = {"type": "integer", "minimum": 1}
_PARAMS = {"type": "array", "minItems": 1, "items": {"type": "array", "items": _NUM}}
_RULE_MAP = {"type": "object", "additionalProperties": False,
             "properties": {name: {"type": "number", "minimum": 0} for name in RULE_NAMES.values()}}


def _target(kind, required, **props):
    return {"type": "object", "additionalProperties": False,
            "required": ["kind", *required],
            "properties": {"kind": {"const": kind}, **props}}


_MH = {"type": "object", "additionalProperties": False,
       "properties": {"iterations": _COUNT, "burn_in": {"type": "integer", "minimum": 0},
                      "thin": _COUNT, "seed": {"type": "integer"}, "chains": _COUNT}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "target"],
    "properties": {
        "schema": {"const": 1},
        "name": {"type": "string"},
        "target": {"oneOf": [
            _target("moments", [], targets={"type": "array", "items": _NUM,
                                            "minItems": 4, "maxItems": 4},
                    sigma={"type": "number", "exclusiveMinimum": 0},
                    J={"type": "integer", "minimum": 10}, params=_PARAMS, holdout=_PARAMS),
            _target("gtest-bernoulli", ["thetas"],
                    thetas={"type": "array", "minItems": 1,
                            "items": {"type": "number", "exclusiveMinimum": 0,
                                      "exclusiveMaximum": 1}},
                    J={"type": "integer", "minimum": 10},
                    holdout={"type": "array", "items": _NUM}),
            _target("ks", ["sample_files"],
                    sample_files={"type": "array", "minItems": 1, "items": {"type": "string"}},
                    params=_PARAMS, J={"type": "integer", "minimum": 10}, holdout=_PARAMS),
            _target("posterior-compile", ["program"], program={"type": "string"},
                    column={"type": "string"}, J={"type": "integer", "minimum": 10}, mh=_MH),
        ]},
        "grammar": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "whitelist": {"type": "array", "uniqueItems": True,
                              "items": {"enum": sorted(PRIMITIVE_SIGNATURES)}},
                "rule_weights": {"type": "object", "additionalProperties": False,
                                 "properties": {t: _RULE_MAP for t in TYPES}},
                "corpus": {"type": "object", "additionalProperties": False, "required": ["dir"],
                           "properties": {"dir": {"type": "string"},
                                          "manifest": {"type": "string"},
                                          "exclude": {"type": "string"},
                                          "smoothing": {"type": "number", "minimum": 0}}},
                "max_depth": _COUNT,
                "dp_const_alpha": {"type": "number", "exclusiveMinimum": 0},
                "dp_proc_beta": {"type": "number", "exclusiveMinimum": 0},
                "arg_count_rate": {"type": "number", "exclusiveMinimum": 0},
                "recursion": {"type": "boolean"},
            },
        },
        "search": {
            "type": "object", "additionalProperties": False,
            "properties": {"iterations": _COUNT, "chains": _COUNT, "seed": {"type": "integer"},
                           "top": _COUNT, "rescore": {"type": "integer", "minimum": 2},
                           "pool": _COUNT},
        },
    },
}


class SpecError(ValueError):
    """A spec file that is not valid JSON or does not match the schema."""


@dataclass
class SynthSpec:
    target: object
    grammar: GrammarConfig = field(default_factory=GrammarConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    name: Optional[str] = None

    @property
    def sample_params(self):
        """Parameter tuples for the holdout sample file (training ones if nothing is held out)."""
        t = self.target
        if isinstance(t, PosteriorCompile):
            return [()]
        held = t.holdout_params if isinstance(t, GTestBernoulli) else list(t.holdout)
        return held or list(t.training_params)


def _where(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<top level>"


def _validate(doc) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = list(validator.iter_errors(doc))
    if not errors:
        return
    err = jsonschema.exceptions.best_match(errors)
    # oneOf failures are unhelpful on their own; use the branch matching the kind
    if err.validator == "oneOf" and isinstance(err.instance, dict):
        kind = err.instance.get("kind")
        for sub in err.context or ():
            branch = sub.schema_path[0] if sub.schema_path else None
            if branch is not None and SCHEMA["properties"]["target"]["oneOf"][branch][
                    "properties"]["kind"]["const"] == kind and sub.validator != "const":
                err = sub
                break
        else:
            if kind not in {b["properties"]["kind"]["const"]
                            for b in SCHEMA["properties"]["target"]["oneOf"]}:
                raise SpecError(f"target.kind: unknown target kind {kind!r}")
    raise SpecError(f"{_where(err)}: {err.message}")


def _rule_weights(g: dict, base_dir: str):
    if "corpus" in g:
        c = g["corpus"]
        directory = os.path.join(base_dir, c["dir"])
        files = load_corpus(directory, c.get("manifest", "manifest.tsv"))
        weights = corpus_rule_weights(files, c.get("exclude"), c.get("smoothing", 1.0))
    else:
        weights = dict(DEFAULT_RULE_WEIGHTS)
    by_name = {name: r for r, name in RULE_NAMES.items()}
    for t, table in g.get("rule_weights", {}).items():
        for name, w in table.items():
            weights[(by_name[name], t)] = float(w)
    return weights


def _build_target(t: dict, base_dir: str):
    kind = t["kind"]
    if kind == "moments":
        return MomentsTarget(tuple(t.get("targets", (0.0, 1.0, 0.0, 0.0))), t.get("sigma", 0.1),
                             t.get("J", 1000), tuple(map(tuple, t.get("params", [[]]))),
                             tuple(map(tuple, t.get("holdout", []))))
    if kind == "gtest-bernoulli":
        return GTestBernoulli(tuple(t["thetas"]), t.get("J", 100), tuple(t.get("holdout", ())))
    if kind == "ks":
        files = [os.path.join(base_dir, f) for f in t["sample_files"]]
        params = t.get("params", [[]] * len(files))
        return KSTwoSample.from_files(files, tuple(map(tuple, params)), t.get("J", 500),
                                      tuple(map(tuple, t.get("holdout", []))))
    with open(os.path.join(base_dir, t["program"]), encoding="utf-8") as fh:
        program = fh.read()
    mh = MHConfig(**{"iterations": 20_000, **t.get("mh", {})})
    return PosteriorCompile(program, t.get("J", 500), t.get("column"), mh)


def parse_spec(doc, base_dir: str = ".") -> SynthSpec:
    """Validate a decoded spec document and build its target, grammar and search settings.

    Relative paths (sample files, programs, corpus directories) resolve
    against ``base_dir``.
    """
    _validate(doc)
    try:
        target = _build_target(doc["target"], base_dir)
        g = doc.get("grammar", {})
        grammar = GrammarConfig(
            rule_weights=_rule_weights(g, base_dir),
            max_depth=g.get("max_depth", 12),
            primitive_whitelist=frozenset(g.get("whitelist", DEFAULT_WHITELIST)),
            dp_const_alpha=g.get("dp_const_alpha", 1.0),
            dp_proc_beta=g.get("dp_proc_beta", 1.0),
            arg_count_rate=g.get("arg_count_rate", 1.0),
            recursion_allowed=g.get("recursion", True),
        )
    except (OSError, GrammarError, ValueError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(str(e)) from e
    search = replace(SearchConfig(), **doc.get("search", {}))
    return SynthSpec(target, grammar, search, doc.get("name"))


def load_spec(path: str) -> SynthSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}: not valid JSON ({e})") from e
    return parse_spec(doc, os.path.dirname(os.path.abspath(path)))
