"""Per-call-edge execution conditions: what must hold for each function in
the selected chain to call the next one.

The model's reply for one edge is a fenced JSON object; ``parse_condition_response``
accepts exactly that shape and nothing else, so malformed output surfaces as
MalformedResponse instead of leaking half-valid structures downstream.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .callgraph import CallChain, FunctionRef
from .errors import CallNotFound, MalformedResponse
from .gateway import BUILTIN_TEMPLATES, LlmGateway, render

CONSTRAINT_KINDS = ("equality", "inequality", "range", "membership", "predicate")
VARIABLE_ORIGINS = ("parameter", "global", "local")
CONDITIONS_SCHEMA = "chainfuzz-conditions-v1"

DEFAULT_REASKS = 3

_FENCE = re.compile(r"```(?:[A-Za-z0-9_+-]*)\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class Constraint:
    variable: str
    kind: str
    expression: str
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if not self.expression:
            raise ValueError("constraint expression must be non-empty")
        if self.kind == "range":
            if self.bounds is None:
                raise ValueError("range constraints require bounds")
            low, high = self.bounds
            if low > high:
                raise ValueError("range bounds must satisfy low <= high")
        elif self.bounds is not None:
            raise ValueError(f"{self.kind} constraints must not carry bounds")


@dataclass(frozen=True)
class DecisionVariable:
    name: str
    origin: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("decision variable name must be non-empty")
        if self.origin not in VARIABLE_ORIGINS:
            raise ValueError(f"unknown variable origin {self.origin!r}")


@dataclass(frozen=True)
class CallEdgeCondition:
    caller: FunctionRef
    callee: FunctionRef
    call_line: int
    snippet: str
    decision_variables: tuple[DecisionVariable, ...]
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        if self.call_line < 1:
            raise ValueError("call_line is 1-based")
        declared = {v.name for v in self.decision_variables}
        for c in self.constraints:
            if c.variable not in declared:
                raise ValueError(f"constraint references undeclared variable {c.variable!r}")


@dataclass(frozen=True)
class ConditionSet:
    chain: CallChain
    edges: tuple[CallEdgeCondition, ...]

    def __post_init__(self):
        if len(self.edges) != self.chain.length - 1:
            raise ValueError("one edge condition per adjacent chain pair required")
        for i, edge in enumerate(self.edges):
            want_caller = self.chain.functions[i].name
            want_callee = self.chain.functions[i + 1].name
            if edge.caller.name != want_caller or edge.callee.name != want_callee:
                raise ValueError(
                    f"edge {i} is {edge.caller.name}->{edge.callee.name}, chain expects {want_caller}->{want_callee}"
                )


# --- response parsing ------------------------------------------------------


def _reject(msg: str):
    raise MalformedResponse(msg)


def _require_keys(obj: dict, required: set[str], optional: set[str], where: str):
    if not isinstance(obj, dict):
        _reject(f"{where} must be a JSON object")
    keys = set(obj)
    missing = required - keys
    if missing:
        _reject(f"{where} is missing key {sorted(missing)[0]!r}")
    extra = keys - required - optional
    if extra:
        _reject(f"{where} has unknown key {sorted(extra)[0]!r}")


def extract_fenced_payload(text: str) -> dict:
    """First fenced block parsed as a JSON object; anything else is rejected."""
    m = _FENCE.search(text)
    if m is None:
        _reject("response carries no fenced block")
    try:
        payload = json.loads(m.group(1))
    except json.JSONDecodeError as exc:
        _reject(f"fenced block is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        _reject("fenced JSON must be an object")
    return payload


def payload_to_edge(payload: dict, caller: FunctionRef, callee: FunctionRef) -> CallEdgeCondition:
    _require_keys(payload, {"call_location", "decision_variables", "constraints"}, set(), "response")
    loc = payload["call_location"]
    _require_keys(loc, {"line", "snippet"}, set(), "call_location")
    if not isinstance(loc["line"], int) or isinstance(loc["line"], bool) or loc["line"] < 1:
        _reject("call_location.line must be an integer >= 1")
    if not isinstance(loc["snippet"], str):
        _reject("call_location.snippet must be a string")

    if not isinstance(payload["decision_variables"], list):
        _reject("decision_variables must be a list")
    variables = []
    for i, item in enumerate(payload["decision_variables"]):
        _require_keys(item, {"name", "origin"}, set(), f"decision_variables[{i}]")
        if not isinstance(item["name"], str) or not item["name"]:
            _reject(f"decision_variables[{i}].name must be a non-empty string")
        if item["origin"] not in VARIABLE_ORIGINS:
            _reject(f"decision_variables[{i}].origin must be one of {VARIABLE_ORIGINS}")
        variables.append(DecisionVariable(name=item["name"], origin=item["origin"]))
    declared = {v.name for v in variables}

    if not isinstance(payload["constraints"], list):
        _reject("constraints must be a list")
    constraints = []
    for i, item in enumerate(payload["constraints"]):
        where = f"constraints[{i}]"
        _require_keys(item, {"variable", "kind", "expression"}, {"bounds"}, where)
        if not isinstance(item["variable"], str) or item["variable"] not in declared:
            _reject(f"{where}.variable must name a declared decision variable")
        if item["kind"] not in CONSTRAINT_KINDS:
            _reject(f"{where}.kind must be one of {CONSTRAINT_KINDS}")
        if not isinstance(item["expression"], str) or not item["expression"]:
            _reject(f"{where}.expression must be a non-empty string")
        bounds = None
        if item["kind"] == "range":
            if "bounds" not in item:
                _reject(f"{where} has kind 'range' but no bounds")
            raw = item["bounds"]
            if (
                not isinstance(raw, list)
                or len(raw) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw)
            ):
                _reject(f"{where}.bounds must be a two-number list")
            if raw[0] > raw[1]:
                _reject(f"{where}.bounds must satisfy low <= high")
            bounds = (float(raw[0]), float(raw[1]))
        elif "bounds" in item:
            _reject(f"{where} carries bounds but kind is not 'range'")
        constraints.append(
            Constraint(variable=item["variable"], kind=item["kind"], expression=item["expression"], bounds=bounds)
        )

    return CallEdgeCondition(
        caller=caller,
        callee=callee,
        call_line=loc["line"],
        snippet=loc["snippet"],
        decision_variables=tuple(variables),
        constraints=tuple(constraints),
    )


def parse_condition_response(text: str, caller: FunctionRef, callee: FunctionRef) -> CallEdgeCondition:
    return payload_to_edge(extract_fenced_payload(text), caller, callee)


def edge_to_payload(edge: CallEdgeCondition) -> dict:
    constraints = []
    for c in edge.constraints:
        item = {"variable": c.variable, "kind": c.kind, "expression": c.expression}
        if c.bounds is not None:
            item["bounds"] = [c.bounds[0], c.bounds[1]]
        constraints.append(item)
    return {
        "call_location": {"line": edge.call_line, "snippet": edge.snippet},
        "decision_variables": [{"name": v.name, "origin": v.origin} for v in edge.decision_variables],
        "constraints": constraints,
    }


def canonical_payload_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


# --- model-driven analysis --------------------------------------------------


def _source_mentions_call(source: str, callee_name: str) -> bool:
    return re.search(rf"\b{re.escape(callee_name)}\s*\(", source) is not None


def analyze_edge(
    caller_source: str,
    callee: FunctionRef,
    gateway: LlmGateway,
    caller: FunctionRef,
    max_reasks: int = DEFAULT_REASKS,
) -> CallEdgeCondition:
    """One gateway round (plus bounded re-asks on malformed output) for a
    single caller->callee pair."""
    if not _source_mentions_call(caller_source, callee.name):
        raise CallNotFound(callee.name, caller.name)
    prompt = render(
        BUILTIN_TEMPLATES["condition_analysis"],
        {"caller_name": caller.name, "callee_name": callee.name, "caller_source": caller_source},
    )
    last_error = None
    for attempt in range(max_reasks + 1):
        response = gateway.complete(prompt)
        try:
            return parse_condition_response(response, caller, callee)
        except MalformedResponse as exc:
            last_error = exc
            prompt = (
                prompt
                + f"\n\nRe-ask {attempt + 1}: the previous reply was rejected ({exc.violation}). "
                "Reply again with exactly one fenced JSON object in the documented shape."
            )
    raise last_error


def analyze_chain(
    chain: CallChain,
    sources: dict[str, str],
    gateway: LlmGateway,
    max_reasks: int = DEFAULT_REASKS,
) -> ConditionSet:
    """One CallEdgeCondition per adjacent pair, in chain order."""
    edges = []
    for i in range(chain.length - 1):
        caller = chain.functions[i]
        callee = chain.functions[i + 1]
        if caller.name not in sources:
            raise CallNotFound(callee.name, f"{caller.name} (no source available)")
        try:
            edges.append(analyze_edge(sources[caller.name], callee, gateway, caller, max_reasks=max_reasks))
        except MalformedResponse as exc:
            raise MalformedResponse(f"edge {caller.name}->{callee.name}: {exc.violation}") from exc
    return ConditionSet(chain=chain, edges=tuple(edges))


# --- persistence ------------------------------------------------------------


def _ref_to_json(ref: FunctionRef) -> dict:
    return {
        "name": ref.name,
        "file": ref.file,
        "line": ref.line,
        "is_extern_declared": ref.is_extern_declared,
        "is_main": ref.is_main,
    }


def _ref_from_json(obj: dict) -> FunctionRef:
    return FunctionRef(
        name=obj["name"],
        file=obj["file"],
        line=obj["line"],
        is_extern_declared=obj["is_extern_declared"],
        is_main=obj["is_main"],
    )


def condition_set_to_json(cset: ConditionSet) -> dict:
    doc = {
        "schema": CONDITIONS_SCHEMA,
        "chain": [_ref_to_json(f) for f in cset.chain.functions],
        "edges": [],
    }
    for edge in cset.edges:
        payload = edge_to_payload(edge)
        doc["edges"].append(
            {
                "caller": edge.caller.name,
                "callee": edge.callee.name,
                "call_location": payload["call_location"],
                "decision_variables": payload["decision_variables"],
                "constraints": payload["constraints"],
            }
        )
    return doc


def condition_set_from_json(doc: dict) -> ConditionSet:
    try:
        if doc.get("schema") != CONDITIONS_SCHEMA:
            _reject(f"unknown conditions schema {doc.get('schema')!r}")
        if not isinstance(doc.get("chain"), list) or not all(isinstance(o, dict) for o in doc["chain"]):
            _reject("chain must be a list of function objects")
        chain = CallChain(tuple(_ref_from_json(o) for o in doc["chain"]))
        by_name = {f.name: f for f in chain.functions}
        if not isinstance(doc.get("edges"), list) or not all(isinstance(r, dict) for r in doc["edges"]):
            _reject("edges must be a list of edge objects")
        edges = []
        for i, row in enumerate(doc["edges"]):
            caller = by_name.get(row.get("caller"))
            callee = by_name.get(row.get("callee"))
            if caller is None or callee is None:
                _reject(f"edges[{i}] names functions outside the chain")
            payload = {
                "call_location": row.get("call_location"),
                "decision_variables": row.get("decision_variables"),
                "constraints": row.get("constraints"),
            }
            edges.append(payload_to_edge(payload, caller, callee))
        return ConditionSet(chain=chain, edges=tuple(edges))
    except MalformedResponse:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedResponse(str(exc)) from exc


def serialize_condition_set(cset: ConditionSet) -> str:
    return json.dumps(condition_set_to_json(cset), indent=2) + "\n"


def deserialize_condition_set(text: str) -> ConditionSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"conditions document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedResponse("conditions document must be a JSON object")
    return condition_set_from_json(doc)


def render_conditions_text(cset: ConditionSet) -> str:
    """Human-readable constraint summary handed to downstream prompts."""
    lines = [f"Call chain: {' -> '.join(cset.chain.names)}"]
    for edge in cset.edges:
        lines.append(f"\nEdge {edge.caller.name} -> {edge.callee.name} (call at line {edge.call_line}):")
        lines.append(f"  site: {edge.snippet.strip()}" if edge.snippet.strip() else "  site: (not recorded)")
        if not edge.constraints:
            lines.append("  unconditional: no guarding constraints")
        for c in edge.constraints:
            extra = f" within [{c.bounds[0]:g}, {c.bounds[1]:g}]" if c.bounds else ""
            lines.append(f"  {c.kind}: {c.expression}{extra}  (variable {c.variable})")
    return "\n".join(lines) + "\n"
