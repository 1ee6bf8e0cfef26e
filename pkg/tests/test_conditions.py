import copy
import json
import random
import string as stringmod

import pytest

from chainfuzz import conditions as cond
from chainfuzz.callgraph import CallChain, FunctionRef
from chainfuzz.errors import CallNotFound, MalformedResponse
from chainfuzz.gateway import make_offline_gateway


def ref(name, **kw):
    return FunctionRef(name=name, file=kw.pop("file", "lib.c"), line=kw.pop("line", 1), **kw)


def fenced(payload) -> str:
    return "Here you go:\n```json\n" + json.dumps(payload, indent=2) + "\n```\n"


MINIMAL = {
    "call_location": {"line": 11, "snippet": "if (c == 'P') parse(fp);"},
    "decision_variables": [{"name": "c", "origin": "local"}],
    "constraints": [{"variable": "c", "kind": "equality", "expression": "c == 'P'"}],
}


def test_parse_minimal_valid_payload():
    edge = cond.parse_condition_response(fenced(MINIMAL), ref("a"), ref("b"))
    assert edge.call_line == 11
    assert len(edge.constraints) == 1
    assert edge.constraints[0].kind == "equality"


def test_parse_rejects_unfenced_text():
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(json.dumps(MINIMAL), ref("a"), ref("b"))


def test_parse_rejects_undeclared_constraint_variable():
    bad = copy.deepcopy(MINIMAL)
    bad["constraints"][0]["variable"] = "ghost"
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))


def test_parse_rejects_unknown_top_level_key():
    bad = dict(MINIMAL, notes="extra")
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))


def test_parse_rejects_bad_origin_and_kind():
    bad = copy.deepcopy(MINIMAL)
    bad["decision_variables"][0]["origin"] = "cosmic"
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))
    bad = copy.deepcopy(MINIMAL)
    bad["constraints"][0]["kind"] = "vibes"
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))


def test_range_bounds_rules():
    ok = copy.deepcopy(MINIMAL)
    ok["constraints"][0] = {"variable": "c", "kind": "range", "expression": "0 < c < 255", "bounds": [1, 254]}
    edge = cond.parse_condition_response(fenced(ok), ref("a"), ref("b"))
    assert edge.constraints[0].bounds == (1.0, 254.0)

    bad = copy.deepcopy(ok)
    bad["constraints"][0]["bounds"] = [254, 1]
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))

    bad = copy.deepcopy(ok)
    del bad["constraints"][0]["bounds"]
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))

    bad = copy.deepcopy(MINIMAL)
    bad["constraints"][0]["bounds"] = [1, 2]  # equality must not carry bounds
    with pytest.raises(MalformedResponse):
        cond.parse_condition_response(fenced(bad), ref("a"), ref("b"))


# --- generative round-trip ---------------------------------------------------


def random_identifier(rng):
    return rng.choice(stringmod.ascii_lowercase) + "".join(
        rng.choice(stringmod.ascii_lowercase + "_0123456789") for _ in range(rng.randint(0, 8))
    )


def random_edge_payload(rng):
    n_vars = rng.randint(0, 4)
    variables = []
    names = set()
    for _ in range(n_vars):
        name = random_identifier(rng)
        while name in names:
            name = random_identifier(rng)
        names.add(name)
        variables.append({"name": name, "origin": rng.choice(cond.VARIABLE_ORIGINS)})
    constraints = []
    if variables:
        for _ in range(rng.randint(0, 5)):
            kind = rng.choice(cond.CONSTRAINT_KINDS)
            item = {
                "variable": rng.choice(variables)["name"],
                "kind": kind,
                "expression": f"x {rng.choice(['==', '<', '>', 'in'])} {rng.randint(-99, 99)}",
            }
            if kind == "range":
                low = rng.randint(-100, 100)
                item["bounds"] = [low, low + rng.randint(0, 50)]
            constraints.append(item)
    return {
        "call_location": {"line": rng.randint(1, 500), "snippet": f"call_{random_identifier(rng)}();"},
        "decision_variables": variables,
        "constraints": constraints,
    }


def random_condition_set(rng):
    length = rng.randint(1, 6)
    names = []
    while len(names) < length:
        n = random_identifier(rng)
        if n not in names:
            names.append(n)
    refs = tuple(
        FunctionRef(name=n, file=f"{n}.c", line=i + 1, is_extern_declared=rng.random() < 0.4, is_main=False)
        for i, n in enumerate(names)
    )
    chain = CallChain(refs)
    edges = tuple(
        cond.payload_to_edge(random_edge_payload(rng), refs[i], refs[i + 1]) for i in range(length - 1)
    )
    return cond.ConditionSet(chain=chain, edges=edges)


def test_response_payload_roundtrip_200_documents():
    rng = random.Random(2024)
    for _ in range(200):
        payload = random_edge_payload(rng)
        edge = cond.parse_condition_response(fenced(payload), ref("a"), ref("b"))
        canon = cond.canonical_payload_text(cond.edge_to_payload(edge))
        reparsed = cond.parse_condition_response("```json\n" + canon + "```", ref("a"), ref("b"))
        assert reparsed == edge
        assert cond.canonical_payload_text(cond.edge_to_payload(reparsed)) == canon


def test_condition_set_roundtrip_byte_identical():
    rng = random.Random(7)
    for _ in range(50):
        cset = random_condition_set(rng)
        text = cond.serialize_condition_set(cset)
        back = cond.deserialize_condition_set(text)
        assert back == cset
        assert cond.serialize_condition_set(back) == text


def mutate_document(rng, doc):
    """Structural mutations over a serialized ConditionSet document."""
    doc = copy.deepcopy(doc)
    ops = rng.randint(1, 3)
    for _ in range(ops):
        choice = rng.random()
        edges_ok = isinstance(doc.get("edges"), list) and doc["edges"] and all(isinstance(e, dict) for e in doc["edges"])
        chain_ok = isinstance(doc.get("chain"), list) and doc["chain"] and all(isinstance(f, dict) for f in doc["chain"])
        if choice < 0.2 and edges_ok:
            edge = rng.choice(doc["edges"])
            if isinstance(edge.get("constraints"), list) and edge["constraints"]:
                c = rng.choice(edge["constraints"])
                c[rng.choice(["variable", "kind", "expression"])] = rng.choice(
                    ["", "ghost", "vibes", 42, None, []]
                )
        elif choice < 0.4 and edges_ok:
            edge = rng.choice(doc["edges"])
            edge["call_location"] = rng.choice([None, {}, {"line": 0, "snippet": ""}, {"line": "x", "snippet": ""}])
        elif choice < 0.55 and edges_ok:
            rng.choice(doc["edges"])[f"extra_{rng.randint(0, 9)}"] = "?"
        elif choice < 0.7:
            doc["schema"] = rng.choice(["", "v999", None])
        elif choice < 0.85 and chain_ok:
            rng.choice(doc["chain"])["line"] = rng.choice([0, -3, "NaN"])
        else:
            tail = doc["edges"][:-1] if isinstance(doc.get("edges"), list) else []
            doc["edges"] = rng.choice([None, "edges", 7, tail])
    return doc


def test_parser_fuzz_never_leaks_invalid_values():
    rng = random.Random(99)
    for _ in range(300):
        base = json.loads(cond.serialize_condition_set(random_condition_set(rng)))
        mutated = mutate_document(rng, base)
        try:
            cset = cond.deserialize_condition_set(json.dumps(mutated))
        except MalformedResponse:
            continue
        # Survivors must satisfy every type invariant.
        assert len(cset.edges) == cset.chain.length - 1
        for edge in cset.edges:
            assert edge.call_line >= 1
            declared = {v.name for v in edge.decision_variables}
            for c in cset.edges[0].constraints:
                assert c.expression
            for c in edge.constraints:
                assert c.variable in declared
                if c.kind == "range":
                    assert c.bounds is not None and c.bounds[0] <= c.bounds[1]
                else:
                    assert c.bounds is None


# --- analyze_edge / analyze_chain --------------------------------------------


def test_analyze_edge_scripted():
    caller = ref("tjLoadImage", file="turbojpeg.c")
    callee = ref("jinit_read_ppm")
    source = "void tjLoadImage(FILE *fp){ int temp_c = fgetc(fp); if (temp_c == 'P') jinit_read_ppm(fp); }"
    payload = {
        "call_location": {"line": 1, "snippet": "if (temp_c == 'P') jinit_read_ppm(fp);"},
        "decision_variables": [{"name": "temp_c", "origin": "local"}],
        "constraints": [{"variable": "temp_c", "kind": "equality", "expression": "temp_c == 'P'"}],
    }
    g = make_offline_gateway(lambda p: fenced(payload))
    edge = cond.analyze_edge(source, callee, g, caller)
    assert edge.constraints[0].expression == "temp_c == 'P'"
    assert g.calls_made == 1


def test_analyze_edge_unconditional_call():
    caller, callee = ref("f"), ref("g")
    payload = {"call_location": {"line": 1, "snippet": "g();"}, "decision_variables": [], "constraints": []}
    g = make_offline_gateway(lambda p: fenced(payload))
    edge = cond.analyze_edge("void f(void){ g(); }", callee, g, caller)
    assert edge.constraints == ()
    assert edge.decision_variables == ()


def test_analyze_edge_call_not_found():
    g = make_offline_gateway(lambda p: "unused")
    with pytest.raises(CallNotFound):
        cond.analyze_edge("void f(void){ }", ref("g"), g, ref("f"))


def test_analyze_edge_reasks_then_fails():
    calls = []

    def responder(prompt):
        calls.append(prompt)
        return "no json here"

    g = make_offline_gateway(responder)
    with pytest.raises(MalformedResponse):
        cond.analyze_edge("void f(void){ g(); }", ref("g"), g, ref("f"), max_reasks=3)
    assert len(calls) == 4  # initial ask + 3 re-asks
    assert "Re-ask 1" in calls[1] and "Re-ask 3" in calls[3]


def test_analyze_edge_recovers_on_reask():
    responses = ["garbage", fenced({"call_location": {"line": 2, "snippet": "g();"}, "decision_variables": [], "constraints": []})]
    g = make_offline_gateway(lambda p: responses.pop(0))
    edge = cond.analyze_edge("void f(void){ g(); }", ref("g"), g, ref("f"))
    assert edge.call_line == 2


def test_analyze_chain_counts_and_order():
    refs = (ref("main", is_main=True), ref("f"), ref("t"))
    chain = CallChain(refs)
    sources = {"main": "int main(void){ f(); }", "f": "void f(void){ t(); }"}

    def responder(prompt):
        return fenced({"call_location": {"line": 1, "snippet": "call"}, "decision_variables": [], "constraints": []})

    cset = cond.analyze_chain(chain, sources, make_offline_gateway(responder))
    assert len(cset.edges) == 2
    assert (cset.edges[0].caller.name, cset.edges[0].callee.name) == ("main", "f")
    assert (cset.edges[1].caller.name, cset.edges[1].callee.name) == ("f", "t")


def test_analyze_chain_length_one_is_empty():
    chain = CallChain((ref("t"),))
    cset = cond.analyze_chain(chain, {}, make_offline_gateway(lambda p: "unused"))
    assert cset.edges == ()


def test_analyze_chain_annotates_failing_pair():
    refs = (ref("a"), ref("b"))
    chain = CallChain(refs)
    g = make_offline_gateway(lambda p: "never valid")
    with pytest.raises(MalformedResponse) as err:
        cond.analyze_chain(chain, {"a": "void a(void){ b(); }"}, g, max_reasks=0)
    assert "a->b" in str(err.value)


def test_render_conditions_text_mentions_everything():
    rng = random.Random(5)
    cset = random_condition_set(rng)
    text = cond.render_conditions_text(cset)
    assert " -> ".join(cset.chain.names) in text
    for edge in cset.edges:
        for c in edge.constraints:
            assert c.expression in text
