import random

import pytest

from chainfuzz import callgraph as cg
from chainfuzz.errors import (
    NoAvailableChain,
    NoFunctionsFound,
    TargetNotInGraph,
    UnreadableSource,
)

from conftest import corpus_meta


def write_tree(tmp_path, files: dict):
    for rel, text in files.items():
        p = tmp_path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return tmp_path


def make_graph(nodes, edges):
    """Synthetic graph builder for selection/enumeration tests.

    nodes: list of (name, extern) tuples; a node named main is marked is_main.
    edges: list of (caller, callee) names.
    """
    refs = {
        name: cg.FunctionRef(name=name, file="synth.c", line=i + 1, is_extern_declared=extern, is_main=name == "main")
        for i, (name, extern) in enumerate(nodes)
    }
    sites = [cg.CallSite(caller=refs[a], callee=refs[b], file="synth.c", line=i + 1) for i, (a, b) in enumerate(edges)]
    return cg.CallGraph(functions=refs, edges=sites, headers=[])


def chain_of(graph, *names):
    return cg.CallChain(tuple(graph.functions[n] for n in names))


# --- build_call_graph ------------------------------------------------------


def test_single_file_direct_call(tmp_path):
    write_tree(tmp_path, {"a.c": "void b(void){} void a(void){b();}\n"})
    g = cg.build_call_graph(tmp_path)
    assert set(g.functions) == {"a", "b"}
    assert [(e.caller.name, e.callee.name) for e in g.edges] == [("a", "b")]


def test_self_recursion_recorded_not_traversed(tmp_path):
    write_tree(tmp_path, {"f.c": "void f(void){f();}\n"})
    g = cg.build_call_graph(tmp_path)
    assert set(g.functions) == {"f"}
    assert [(e.caller.name, e.callee.name) for e in g.edges] == [("f", "f")]
    chains = cg.enumerate_call_chains(g, g.functions["f"], max_depth=8)
    assert [c.names for c in chains] == [("f",)]  # root by zero in-degree, no traversal


def test_extern_detection_from_headers(tmp_path):
    write_tree(
        tmp_path,
        {
            "api.h": "int entry(int x);\nstatic int helper(int x);\n",
            "impl.c": '#include "api.h"\nint entry(int x){return x;}\nint internal(int x){return x;}\n',
        },
    )
    g = cg.build_call_graph(tmp_path)
    assert g.functions["entry"].is_extern_declared
    assert not g.functions["internal"].is_extern_declared
    assert "api.h" in g.headers


def test_unresolved_and_indirect_calls_become_diagnostics(tmp_path):
    write_tree(
        tmp_path,
        {
            "p.c": (
                "typedef void (*fn)(void);\n"
                "void a(void){}\n"
                "void run(fn f){ (*f)(); a(); missing(); }\n"
            )
        },
    )
    g = cg.build_call_graph(tmp_path)
    assert [(e.caller.name, e.callee.name) for e in g.edges] == [("run", "a")]
    kinds = {d.kind for d in g.diagnostics}
    assert "indirect_call" in kinds
    assert "unresolved_callee" in kinds


def test_comments_strings_and_macros_do_not_create_edges(tmp_path):
    write_tree(
        tmp_path,
        {
            "c.c": (
                "void b(void){}\n"
                "/* b(); */\n"
                "// b();\n"
                "#define CALL_B() b()\n"
                'void a(void){ const char *s = "b()"; (void)s; }\n'
            )
        },
    )
    g = cg.build_call_graph(tmp_path)
    assert g.edges == []


def test_local_prototype_is_not_a_call(tmp_path):
    write_tree(tmp_path, {"l.c": "void a(void){ int b(int); }\nint b(int x){return x;}\n"})
    g = cg.build_call_graph(tmp_path)
    assert g.edges == []


def test_no_functions_found(tmp_path):
    write_tree(tmp_path, {"empty.c": "/* nothing here */\n"})
    with pytest.raises(NoFunctionsFound):
        cg.build_call_graph(tmp_path)


def test_unreadable_source_root(tmp_path):
    with pytest.raises(UnreadableSource):
        cg.build_call_graph(tmp_path / "does_not_exist")


def test_ppm_mini_graph_matches_hand_enumeration(corpus_dir):
    # Oracle: the calls in the fixture source, enumerated by hand.
    g = cg.build_call_graph(corpus_dir / "ppm_mini")
    assert set(g.functions) == {"main", "load_image", "read_header", "get_row"}
    assert sorted((e.caller.name, e.callee.name) for e in g.edges) == [
        ("load_image", "read_header"),
        ("main", "load_image"),
        ("read_header", "get_row"),
    ]
    chains = cg.enumerate_call_chains(g, g.functions["get_row"])
    assert ("main", "load_image", "read_header", "get_row") in [c.names for c in chains]


def test_extract_function_source(corpus_dir):
    g = cg.build_call_graph(corpus_dir / "ppm_mini")
    src = cg.extract_function_source(g, "read_header")
    assert src.startswith("static int read_header")
    assert src.count("{") == src.count("}")
    assert "fscanf" in src


# --- enumerate_call_chains -------------------------------------------------


def test_enumeration_small_exhaustive():
    g = make_graph([("a", False), ("b", True), ("c", False)], [("a", "b"), ("b", "c")])
    chains = cg.enumerate_call_chains(g, g.functions["c"], max_depth=8)
    assert {c.names for c in chains} == {("a", "b", "c"), ("b", "c")}


def test_enumeration_cycle_never_repeats():
    g = make_graph([("a", True), ("b", True), ("t", False)], [("a", "b"), ("b", "a"), ("b", "t")])
    chains = cg.enumerate_call_chains(g, g.functions["t"], max_depth=8)
    for c in chains:
        assert len(set(c.names)) == c.length
    assert {c.names for c in chains} == {("b", "t"), ("a", "b", "t")}


def test_target_not_in_graph():
    g = make_graph([("a", False)], [])
    ghost = cg.FunctionRef(name="ghost", file="x.c", line=1)
    with pytest.raises(TargetNotInGraph):
        cg.enumerate_call_chains(g, ghost)


def random_dag(rng, max_nodes=40, max_edges=120):
    n = rng.randint(2, max_nodes)
    names = [f"f{i:02d}" for i in range(n)]
    if rng.random() < 0.5:
        names[0] = "main"
    nodes = [(name, rng.random() < 0.3) for name in names]
    possible = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(possible)
    edges = possible[: rng.randint(0, min(max_edges, len(possible)))]
    return make_graph(nodes, edges), names


def oracle_enumerate(graph, target_name, max_depth):
    """Forward DFS from every qualifying root — independent of the
    backward-walking implementation."""
    fwd = {}
    for e in graph.edges:
        if e.caller.name != e.callee.name:
            fwd.setdefault(e.caller.name, set()).add(e.callee.name)
    roots = [n for n in graph.functions if cg._is_root(graph, n)]
    found = set()

    def dfs(node, path):
        if len(path) > max_depth:
            return
        if node == target_name:
            found.add(tuple(path))
        for nxt in fwd.get(node, ()):  # noqa: B007
            if nxt not in path:
                dfs(nxt, path + [nxt])

    for r in roots:
        dfs(r, [r])
    return found


def test_enumeration_matches_bruteforce_oracle():
    rng = random.Random(1207)
    for _ in range(25):
        g, names = random_dag(rng, max_nodes=14, max_edges=30)
        target = rng.choice(names)
        got = {c.names for c in cg.enumerate_call_chains(g, g.functions[target], max_depth=8)}
        assert got == oracle_enumerate(g, target, 8)


def test_enumeration_monotone_in_depth():
    rng = random.Random(42)
    for _ in range(10):
        g, names = random_dag(rng, max_nodes=12, max_edges=24)
        target = rng.choice(names)
        shallow = {c.names for c in cg.enumerate_call_chains(g, g.functions[target], max_depth=3)}
        deep = {c.names for c in cg.enumerate_call_chains(g, g.functions[target], max_depth=7)}
        assert shallow <= deep


def test_enumeration_canonical_order():
    g = make_graph([("a", True), ("b", True), ("t", False)], [("a", "t"), ("b", "t"), ("a", "b")])
    chains = cg.enumerate_call_chains(g, g.functions["t"], max_depth=8)
    keys = [(c.length, c.names) for c in chains]
    assert keys == sorted(keys)


# --- select_available_chain ------------------------------------------------


def test_select_shortest_main_rooted():
    g = make_graph(
        [("main", False), ("f", False), ("g", False), ("h", False), ("t", False)],
        [("main", "f"), ("f", "t"), ("main", "g"), ("g", "h"), ("h", "t")],
    )
    chains = [chain_of(g, "main", "f", "t"), chain_of(g, "main", "g", "h", "t")]
    assert cg.select_available_chain(chains, g).names == ("main", "f", "t")


def test_select_extern_fallback():
    g = make_graph(
        [("extern_api", True), ("internal_fn", False), ("t", False)],
        [("extern_api", "t"), ("internal_fn", "t")],
    )
    chains = [chain_of(g, "extern_api", "t"), chain_of(g, "internal_fn", "t")]
    assert cg.select_available_chain(chains, g).names == ("extern_api", "t")


def test_select_lexicographic_tiebreak():
    g = make_graph(
        [("main", False), ("beta", False), ("alpha", False), ("t", False)],
        [("main", "beta"), ("beta", "t"), ("main", "alpha"), ("alpha", "t")],
    )
    chains = [chain_of(g, "main", "beta", "t"), chain_of(g, "main", "alpha", "t")]
    assert cg.select_available_chain(chains, g).names == ("main", "alpha", "t")


def test_select_no_available_chain():
    g = make_graph([("a", False), ("t", False)], [("a", "t")])
    with pytest.raises(NoAvailableChain):
        cg.select_available_chain([chain_of(g, "a", "t")], g)
    with pytest.raises(NoAvailableChain):
        cg.select_available_chain([], g)


def test_select_is_pure():
    g = make_graph([("main", False), ("x", False), ("t", False)], [("main", "x"), ("x", "t")])
    chains = [chain_of(g, "main", "x", "t")]
    first = cg.select_available_chain(chains, g)
    second = cg.select_available_chain(chains, g)
    assert first == second
    assert chains == [chain_of(g, "main", "x", "t")]


def select_oracle(chains):
    main_rooted = [c for c in chains if c.root.is_main]
    pool = main_rooted or [c for c in chains if c.root.is_extern_declared]
    if not pool:
        return None
    return min(pool, key=lambda c: (c.length, c.names))


def test_select_matches_oracle_on_random_graphs():
    rng = random.Random(77)
    checked = 0
    for _ in range(40):
        g, names = random_dag(rng, max_nodes=12, max_edges=30)
        target = rng.choice(names)
        chains = cg.enumerate_call_chains(g, g.functions[target], max_depth=8)
        expected = select_oracle(chains)
        if expected is None:
            if chains:
                with pytest.raises(NoAvailableChain):
                    cg.select_available_chain(chains, g)
            continue
        assert cg.select_available_chain(chains, g).names == expected.names
        checked += 1
    assert checked > 5


def test_select_tjstyle_fixture(fixtures_dir):
    g = cg.build_call_graph(fixtures_dir / "tjstyle")
    chains = cg.enumerate_call_chains(g, g.functions["get_rgb_row"])
    selected = cg.select_available_chain(chains, g)
    assert selected.names == ("tjLoadImage", "jinit_read_ppm", "start_input_ppm", "get_rgb_row")


def test_corpus_known_chains_match_selection(corpus_dir):
    for name in ("ppm_mini", "magic_gate", "chain_deep"):
        meta = corpus_meta(name)
        g = cg.build_call_graph(corpus_dir / name / meta["analysis_root"])
        chains = cg.enumerate_call_chains(g, g.functions[meta["target_function"]])
        assert cg.select_available_chain(chains, g).names == tuple(meta["known_chain"])


# --- resolve_entry ---------------------------------------------------------


def test_resolve_entry_main_rooted():
    g = make_graph([("main", False), ("parse", False), ("t", False)], [("main", "parse"), ("parse", "t")])
    entry, template = cg.resolve_entry(chain_of(g, "main", "parse", "t"), g)
    assert entry.name == "parse"
    assert template == "synth.c"  # the file holding main


def test_resolve_entry_extern_rooted():
    g = make_graph([("extern_api", True), ("t", False)], [("extern_api", "t")])
    entry, template = cg.resolve_entry(chain_of(g, "extern_api", "t"), g)
    assert entry.name == "extern_api"


def test_resolve_entry_degenerate_chain():
    g = make_graph([("t", False)], [])
    entry, _ = cg.resolve_entry(chain_of(g, "t"), g)
    assert entry.name == "t"


# --- JSON dumps ------------------------------------------------------------


def test_graph_json_dump_schema(tmp_path, corpus_dir):
    g = cg.build_call_graph(corpus_dir / "ppm_mini")
    doc = cg.graph_to_json(g)
    assert doc["schema"] == cg.GRAPH_SCHEMA
    assert {f["name"] for f in doc["functions"]} == set(g.functions)
    for e in doc["edges"]:
        assert set(e) == {"caller", "callee", "file", "line"}
    chains = cg.enumerate_call_chains(g, g.functions["get_row"])
    cdoc = cg.chains_to_json(g.functions["get_row"], 12, chains, chains[0])
    assert cdoc["target"] == "get_row"
    out = tmp_path / "chains.json"
    cg.dump_json(cdoc, out)
    assert out.read_text().endswith("\n")
