"""Scenario files: declarative JSON describing objects and checks.

A scenario declares named charts, fields, bivectors/two-forms, maps,
algebroids, Dirac structures, Dirac maps, actions, witnesses, quotients,
morphisms and paths, followed by an ordered list of checks.  All indices
in scenario files are 1-based (coordinates ``x1..xN``, entry keys
``"i,j"``, structure keys ``"k|i,j"``); path expressions use the variable
``t``.  Every referenced label must resolve at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .action import ActionModel, MoritaWitness, QuotientChartModel
from .algebroid import LieAlgebroidModel, MorphismData, \
    cotangent_algebroid, opposite_algebroid, tangent_algebroid, \
    transformation_algebroid
from .apath import APath, interval_chart
from .calculus import Bivector, ChartDomain, OneForm, ScalarField, \
    SmoothMap, TwoForm, VectorField
from .dirac import DiracMapData, DiracStructureModel, GeneralizedSection, \
    graph_of_bivector, graph_of_two_form
from .errors import SchemaViolation, UnresolvedLabel

CHECK_KINDS = (
    "algebroid_axioms", "morphism", "pullback_fiber", "fibered_product",
    "dirac", "gauge", "dirac_map", "induced_action", "action", "module",
    "unique_lift", "leaf_action", "quasi_equivalence", "strong_morita",
    "tensor_distribution", "apath_valid", "apath_integrate",
    "transport_invariances", "psi_transport",
)

ODE_KINDS = {"apath_integrate", "transport_invariances", "psi_transport"}

BUILTIN_DEFAULTS = {
    "tolerance": 1e-8,
    "ode_tolerance": 1e-6,
    "samples": 64,
    "seed": 0,
    "horizon": 10.0,
    "step": 1e-3,
}


@dataclass
class CheckSpec:
    check_id: str
    kind: str
    params: dict


@dataclass
class Scenario:
    name: str
    defaults: dict
    charts: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    bivectors: dict = field(default_factory=dict)
    two_forms: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)
    algebroids: dict = field(default_factory=dict)
    dirac_structures: dict = field(default_factory=dict)
    dirac_maps: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    quotients: dict = field(default_factory=dict)
    morphisms: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def resolve(self, table_name, label):
        table = getattr(self, table_name)
        if label not in table:
            raise UnresolvedLabel(
                f"unknown {table_name.rstrip('s')} label {label!r}")
        return table[label]


def _need(obj, key, where):
    if key not in obj:
        raise SchemaViolation(f"missing {key!r} in {where}")
    return obj[key]


def _as_name(v, where):
    if not isinstance(v, str) or not v:
        raise SchemaViolation(f"{where} must be a non-empty string")
    return v


def _pair_key(raw, where, dim):
    try:
        i, j = (int(p) for p in raw.split(","))
    except ValueError:
        raise SchemaViolation(f"bad entry key {raw!r} in {where}")
    if not (1 <= i <= dim and 1 <= j <= dim):
        raise SchemaViolation(f"entry key {raw!r} out of range in {where}")
    return i - 1, j - 1


def _structure_key(raw, where, rank):
    try:
        k_part, ij = raw.split("|")
        k = int(k_part)
        i, j = (int(p) for p in ij.split(","))
    except ValueError:
        raise SchemaViolation(f"bad structure key {raw!r} in {where}")
    if not all(1 <= v <= rank for v in (i, j, k)):
        raise SchemaViolation(f"structure key {raw!r} out of range in {where}")
    return k - 1, i - 1, j - 1


TIME_NAMES = {"t": 0}


def load_scenario(path) -> Scenario:
    """Parse and fully resolve a scenario file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as jde:
            raise SchemaViolation(f"not valid JSON: {jde}") from jde
    if not isinstance(raw, dict):
        raise SchemaViolation("top level must be an object")

    defaults = dict(BUILTIN_DEFAULTS)
    defaults.update(raw.get("defaults", {}))
    sc = Scenario(name=raw.get("name", "scenario"), defaults=defaults)

    for c in raw.get("charts", []):
        name = _as_name(_need(c, "name", "chart"), "chart name")
        sc.charts[name] = ChartDomain(
            name, int(_need(c, "dim", f"chart {name!r}")),
            tuple(tuple(iv) for iv in _need(c, "box", f"chart {name!r}")))

    for f in raw.get("fields", []):
        name = _as_name(_need(f, "name", "field"), "field name")
        chart = sc.resolve("charts", _need(f, "chart", f"field {name!r}"))
        sc.fields[name] = ScalarField.parse(
            chart, _need(f, "expr", f"field {name!r}"))

    def entry_table(spec, chart, where):
        out = {}
        for key, text in _need(spec, "entries", where).items():
            ij = _pair_key(key, where, chart.dim)
            out[ij] = ScalarField.parse(chart, text)
        return out

    for b in raw.get("bivectors", []):
        name = _as_name(_need(b, "name", "bivector"), "bivector name")
        chart = sc.resolve("charts", _need(b, "chart", f"bivector {name!r}"))
        sc.bivectors[name] = Bivector(
            chart, entry_table(b, chart, f"bivector {name!r}"))

    for b in raw.get("two_forms", []):
        name = _as_name(_need(b, "name", "two_form"), "two_form name")
        chart = sc.resolve("charts", _need(b, "chart", f"two_form {name!r}"))
        sc.two_forms[name] = TwoForm(
            chart, entry_table(b, chart, f"two_form {name!r}"))

    for m in raw.get("maps", []):
        name = _as_name(_need(m, "name", "map"), "map name")
        src = sc.resolve("charts", _need(m, "source", f"map {name!r}"))
        tgt = sc.resolve("charts", _need(m, "target", f"map {name!r}"))
        comps = _need(m, "components", f"map {name!r}")
        sc.maps[name] = SmoothMap.parse(src, tgt, comps)

    for a in raw.get("algebroids", []):
        name = _as_name(_need(a, "name", "algebroid"), "algebroid name")
        sc.algebroids[name] = _build_algebroid(sc, a, name)

    for d in raw.get("dirac_structures", []):
        name = _as_name(_need(d, "name", "dirac structure"), "dirac name")
        sc.dirac_structures[name] = _build_dirac(sc, d, name)

    for dm in raw.get("dirac_maps", []):
        name = _as_name(_need(dm, "name", "dirac map"), "dirac map name")
        sc.dirac_maps[name] = DiracMapData(
            source=sc.resolve("dirac_structures",
                              _need(dm, "source", f"dirac map {name!r}")),
            target=sc.resolve("dirac_structures",
                              _need(dm, "target", f"dirac map {name!r}")),
            map=sc.resolve("maps", _need(dm, "map", f"dirac map {name!r}")))

    for act in raw.get("actions", []):
        name = _as_name(_need(act, "name", "action"), "action name")
        sc.actions[name] = _build_action(sc, act, name, defaults)

    for w in raw.get("witnesses", []):
        name = _as_name(_need(w, "name", "witness"), "witness name")
        sc.witnesses[name] = MoritaWitness(
            X=sc.resolve("charts", _need(w, "total", f"witness {name!r}")),
            J1=sc.resolve("maps", _need(w, "j1", f"witness {name!r}")),
            J2=sc.resolve("maps", _need(w, "j2", f"witness {name!r}")),
            left=sc.resolve("actions", _need(w, "left", f"witness {name!r}")),
            right=sc.resolve("actions",
                             _need(w, "right", f"witness {name!r}")),
            horizon=float(w.get("horizon", defaults["horizon"])))

    for q in raw.get("quotients", []):
        name = _as_name(_need(q, "name", "quotient"), "quotient name")
        sc.quotients[name] = QuotientChartModel(
            total=sc.resolve("charts", _need(q, "total", f"quotient {name!r}")),
            leaf=sc.resolve("charts", _need(q, "leaf", f"quotient {name!r}")),
            projection=sc.resolve("maps",
                                  _need(q, "projection", f"quotient {name!r}")),
            section=sc.resolve("maps",
                               _need(q, "section", f"quotient {name!r}")))

    for m in raw.get("morphisms", []):
        name = _as_name(_need(m, "name", "morphism"), "morphism name")
        source = sc.resolve("algebroids",
                            _need(m, "source", f"morphism {name!r}"))
        target = sc.resolve("algebroids",
                            _need(m, "target", f"morphism {name!r}"))
        base_map = sc.resolve("maps",
                              _need(m, "base_map", f"morphism {name!r}"))
        rows = _need(m, "matrix", f"morphism {name!r}")
        matrix = tuple(
            tuple(ScalarField.parse(source.base, txt) for txt in row)
            for row in rows)
        sc.morphisms[name] = MorphismData(source, target, base_map, matrix)

    tchart = interval_chart()
    for p in raw.get("paths", []):
        name = _as_name(_need(p, "name", "path"), "path name")
        A = sc.resolve("algebroids", _need(p, "algebroid", f"path {name!r}"))
        coeffs = tuple(
            ScalarField.parse(tchart, txt, TIME_NAMES)
            for txt in _need(p, "coefficients", f"path {name!r}"))
        base = SmoothMap.parse(
            tchart, A.base, _need(p, "base", f"path {name!r}"), TIME_NAMES)
        sc.paths[name] = APath(A, coeffs, base)

    seen_ids = set()
    for n, c in enumerate(raw.get("checks", [])):
        kind = _need(c, "kind", f"check #{n + 1}")
        if kind not in CHECK_KINDS:
            raise SchemaViolation(f"unknown check kind {kind!r}")
        check_id = c.get("id", f"{kind}-{n + 1}")
        if check_id in seen_ids:
            raise SchemaViolation(f"duplicate check id {check_id!r}")
        seen_ids.add(check_id)
        params = {k: v for k, v in c.items() if k not in ("kind", "id")}
        _resolve_check_labels(sc, kind, params)
        sc.checks.append(CheckSpec(check_id, kind, params))

    return sc


def _build_algebroid(sc, spec, name) -> LieAlgebroidModel:
    kind = _need(spec, "kind", f"algebroid {name!r}")
    if kind == "tangent":
        chart = sc.resolve("charts", _need(spec, "chart", name))
        A = tangent_algebroid(chart, label=name)
    elif kind == "cotangent":
        P = sc.resolve("bivectors", _need(spec, "bivector", name))
        A = cotangent_algebroid(P, label=name)
    elif kind == "transformation":
        chart = sc.resolve("charts", _need(spec, "chart", name))
        gen_rows = _need(spec, "generators", name)
        gens = tuple(VectorField.parse(chart, row) for row in gen_rows)
        rank = len(gens)
        brackets = {}
        for key, consts in spec.get("structure", {}).items():
            k, i, j = _structure_key(key, name, rank)
            if (i, j) not in brackets:
                brackets[(i, j)] = [0.0] * rank
            brackets[(i, j)][k] = float(consts)
        brackets = {ij: tuple(v) for ij, v in brackets.items()}
        A = transformation_algebroid(chart, brackets, gens, label=name)
    elif kind == "dirac":
        from .dirac import dirac_algebroid
        D = sc.resolve("dirac_structures", _need(spec, "dirac", name))
        A = dirac_algebroid(D, label=name)
    elif kind == "opposite":
        A = opposite_algebroid(sc.resolve("algebroids",
                                          _need(spec, "of", name)))
        A.label = name
    elif kind == "custom":
        chart = sc.resolve("charts", _need(spec, "chart", name))
        rank = int(_need(spec, "rank", name))
        anchor_rows = _need(spec, "anchor", name)
        if len(anchor_rows) != rank:
            raise SchemaViolation(
                f"algebroid {name!r}: anchor needs {rank} columns")
        anchor = tuple(VectorField.parse(chart, row) for row in anchor_rows)
        struct = {}
        for key, text in spec.get("structure", {}).items():
            k, i, j = _structure_key(key, name, rank)
            if (i, j) not in struct:
                struct[(i, j)] = [ScalarField.constant(chart, 0)] * rank
            struct[(i, j)][k] = ScalarField.parse(chart, text)
        struct = {ij: tuple(v) for ij, v in struct.items()}
        A = LieAlgebroidModel(chart, rank, anchor, struct, label=name)
    else:
        raise SchemaViolation(f"unknown algebroid kind {kind!r}")
    return A


def _build_dirac(sc, spec, name) -> DiracStructureModel:
    if "graph_of_bivector" in spec:
        P = sc.resolve("bivectors", spec["graph_of_bivector"])
        return graph_of_bivector(P, label=name)
    if "graph_of_two_form" in spec:
        B = sc.resolve("two_forms", spec["graph_of_two_form"])
        return graph_of_two_form(B, label=name)
    chart = sc.resolve("charts", _need(spec, "chart", f"dirac {name!r}"))
    frame = []
    for s in _need(spec, "frame", f"dirac {name!r}"):
        vec = VectorField.parse(chart, _need(s, "vector", name))
        form = OneForm.parse(chart, _need(s, "form", name))
        frame.append(GeneralizedSection(chart, vec, form))
    return DiracStructureModel(chart, tuple(frame), label=name)


def _build_action(sc, spec, name, defaults) -> ActionModel:
    A = sc.resolve("algebroids", _need(spec, "algebroid", f"action {name!r}"))
    total = sc.resolve("charts", _need(spec, "total", f"action {name!r}"))
    momentum = sc.resolve("maps", _need(spec, "momentum", f"action {name!r}"))
    rows = _need(spec, "fields", f"action {name!r}")
    fields = tuple(VectorField.parse(total, row) for row in rows)
    return ActionModel(
        algebroid=A, total=total, momentum=momentum, fields=fields,
        side=spec.get("side", "right"),
        horizon=float(spec.get("horizon", defaults["horizon"])))


# label references used by each check kind: param name -> scenario table
_CHECK_REFS = {
    "algebroid_axioms": {"target": "algebroids"},
    "morphism": {"target": "morphisms"},
    "pullback_fiber": {"algebroid": "algebroids", "map": "maps"},
    "fibered_product": {"m1": "morphisms", "m2": "morphisms"},
    "dirac": {"target": "dirac_structures"},
    "gauge": {"target": "dirac_structures", "two_form": "two_forms"},
    "dirac_map": {"target": "dirac_maps"},
    "induced_action": {"target": "dirac_maps"},
    "action": {"target": "actions"},
    "module": {"target": "actions"},
    "unique_lift": {"algebroid": "algebroids", "map": "maps"},
    "leaf_action": {"action": "actions", "quotient": "quotients"},
    "quasi_equivalence": {"target": "witnesses"},
    "strong_morita": {"target": "witnesses"},
    "tensor_distribution": {"right": "actions", "left": "actions"},
    "apath_valid": {"target": "paths"},
    "apath_integrate": {"path": "paths", "action": "actions"},
    "transport_invariances": {"path": "paths", "action": "actions",
                              "witness": "witnesses"},
    "psi_transport": {"witness": "witnesses", "module": "actions",
                      "path": "paths"},
}


_OPTIONAL_REFS = {("transport_invariances", "witness")}


def _resolve_check_labels(sc, kind, params):
    """Replace label strings by resolved objects; missing labels raise."""
    for key, table in _CHECK_REFS.get(kind, {}).items():
        if key in params:
            params[key] = sc.resolve(table, params[key])
        elif (kind, key) not in _OPTIONAL_REFS:
            raise SchemaViolation(
                f"check kind {kind!r} requires {key!r}")
