"""Static call-graph construction and call-chain selection for C sources.

The scanner is deliberately lightweight: it blanks comments, literals and
preprocessor lines, then finds function definitions (identifier + parameter
list + body at brace depth 0) and direct call sites inside bodies.  Calls it
cannot resolve to a definition in the tree — function pointers, macros,
externally defined callees — become diagnostics, never edges.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NoAvailableChain, NoFunctionsFound, TargetNotInGraph, UnreadableSource

# Words that can never be a function name at a definition or call site.
_KEYWORDS = {
    "if", "else", "for", "while", "do", "switch", "case", "default", "return",
    "goto", "break", "continue", "sizeof", "typedef", "struct", "union", "enum",
    "static", "extern", "inline", "const", "volatile", "register", "auto",
    "unsigned", "signed", "void", "int", "char", "short", "long", "float",
    "double", "_Bool", "_Static_assert", "_Alignas", "_Alignof", "_Noreturn",
    "__attribute__", "__asm__", "asm", "__extension__", "__restrict", "restrict",
    "__inline", "__inline__", "__typeof__", "typeof",
}

# Keyword tokens that legitimately precede a call expression.
_CALL_OK_PREFIX_KEYWORDS = {"return", "else", "do", "case"}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\S")

DEFAULT_MAX_DEPTH = 12
DEFAULT_HEADER_GLOBS = ("*.h", "**/*.h")


@dataclass(frozen=True)
class FunctionRef:
    """A function definition (or, for diagnostics, a referenced name)."""

    name: str
    file: str
    line: int
    is_extern_declared: bool = False
    is_main: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("function name must be non-empty")
        if self.line < 1:
            raise ValueError("line numbers are 1-based")
        if self.is_main and self.name != "main":
            raise ValueError("is_main requires name == 'main'")


@dataclass(frozen=True)
class CallSite:
    caller: FunctionRef
    callee: FunctionRef
    file: str
    line: int


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # unresolved_callee | indirect_call | duplicate_definition
    file: str
    line: int
    detail: str


@dataclass(frozen=True)
class CallChain:
    """Ordered function sequence (F_n, ..., F_1, F_0) ending at the target."""

    functions: tuple[FunctionRef, ...]

    def __post_init__(self):
        if len(self.functions) < 1:
            raise ValueError("a call chain holds at least the target")
        names = [f.name for f in self.functions]
        if len(set(names)) != len(names):
            raise ValueError("call chains are simple paths; repeated function")

    @property
    def length(self) -> int:
        return len(self.functions)

    @property
    def root(self) -> FunctionRef:
        return self.functions[0]

    @property
    def target(self) -> FunctionRef:
        return self.functions[-1]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.functions)


@dataclass
class CallGraph:
    functions: dict[str, FunctionRef]
    edges: list[CallSite]
    headers: list[str]
    diagnostics: list[Diagnostic] = field(default_factory=list)
    # name -> (file, first_line, last_line) of the definition body
    definition_spans: dict[str, tuple[str, int, int]] = field(default_factory=dict)
    source_root: str = ""

    def callers_of(self, name: str) -> set[str]:
        return {e.caller.name for e in self.edges if e.callee.name == name and e.caller.name != name}

    def callees_of(self, name: str) -> set[str]:
        return {e.callee.name for e in self.edges if e.caller.name == name and e.callee.name != name}

    def in_degree(self, name: str) -> int:
        # Self-recursion does not count: a function only calling itself is a root.
        return len(self.callers_of(name))


def _blank_non_code(text: str) -> str:
    """Replace comments, string/char literal bodies and preprocessor lines
    with spaces, preserving line structure so offsets keep their lines."""
    out = list(text)
    i, n = 0, len(text)
    NORMAL, LINE_C, BLOCK_C, STRING, CHAR, PREPROC = range(6)
    state = NORMAL
    at_line_start = True
    while i < n:
        c = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if state == NORMAL:
            if at_line_start and c == "#":
                state = PREPROC
                out[i] = " "
            elif c == "/" and nxt == "/":
                state = LINE_C
                out[i] = out[i + 1] = " "
                i += 1
            elif c == "/" and nxt == "*":
                state = BLOCK_C
                out[i] = out[i + 1] = " "
                i += 1
            elif c == '"':
                state = STRING
            elif c == "'":
                state = CHAR
            if c == "\n":
                at_line_start = True
            elif not c.isspace():
                at_line_start = False
        elif state == PREPROC:
            if c == "\n":
                if text[i - 1] == "\\":
                    pass  # continuation: stay in PREPROC
                else:
                    state = NORMAL
                at_line_start = True
            else:
                out[i] = " "
        elif state == LINE_C:
            if c == "\n":
                state = NORMAL
                at_line_start = True
            else:
                out[i] = " "
        elif state == BLOCK_C:
            if c == "*" and nxt == "/":
                out[i] = out[i + 1] = " "
                state = NORMAL
                i += 1
            elif c != "\n":
                out[i] = " "
        elif state == STRING:
            if c == "\\" and nxt:
                out[i] = " "
                if nxt != "\n":
                    out[i + 1] = " "
                i += 1
            elif c == '"':
                state = NORMAL
            elif c != "\n":
                out[i] = " "
        elif state == CHAR:
            if c == "\\" and nxt:
                out[i] = " "
                if nxt != "\n":
                    out[i + 1] = " "
                i += 1
            elif c == "'":
                state = NORMAL
            elif c != "\n":
                out[i] = " "
        i += 1
    return "".join(out)


@dataclass
class _Tok:
    text: str
    line: int
    start: int


def _tokens(blanked: str) -> list[_Tok]:
    toks = []
    line = 1
    pos = 0
    for m in _TOKEN.finditer(blanked):
        line += blanked.count("\n", pos, m.start())
        pos = m.start()
        toks.append(_Tok(m.group(), line, m.start()))
    return toks


@dataclass
class _RawDef:
    name: str
    line: int
    body_open_tok: int  # token index of '{'
    body_close_tok: int
    body_end_line: int
    is_static: bool


@dataclass
class _RawCall:
    caller: str
    name: str
    line: int


@dataclass
class _FileScan:
    defs: list[_RawDef]
    calls: list[_RawCall]
    decls: list[tuple[str, int, bool]]  # (name, line, is_static) — prototypes at depth 0
    indirect: list[tuple[int, str]]  # (line, detail)


def _match_paren(toks: list[_Tok], open_idx: int) -> int:
    depth = 0
    for j in range(open_idx, len(toks)):
        t = toks[j].text
        if t == "(":
            depth += 1
        elif t == ")":
            depth -= 1
            if depth == 0:
                return j
    return -1


def _match_brace(toks: list[_Tok], open_idx: int) -> int:
    depth = 0
    for j in range(open_idx, len(toks)):
        t = toks[j].text
        if t == "{":
            depth += 1
        elif t == "}":
            depth -= 1
            if depth == 0:
                return j
    return -1


def _scan_translation_unit(blanked: str) -> _FileScan:
    toks = _tokens(blanked)
    scan = _FileScan([], [], [], [])
    i = 0
    n = len(toks)
    stmt_has_static = False
    while i < n:
        t = toks[i]
        if t.text == "static":
            stmt_has_static = True
        elif t.text in (";", "}"):
            stmt_has_static = False
        if _IDENT.fullmatch(t.text) and t.text not in _KEYWORDS and i + 1 < n and toks[i + 1].text == "(":
            close = _match_paren(toks, i + 1)
            if close == -1:
                i += 1
                continue
            after = toks[close + 1].text if close + 1 < n else ""
            if after == "{":
                body_close = _match_brace(toks, close + 1)
                if body_close == -1:
                    i = close + 1
                    continue
                scan.defs.append(
                    _RawDef(
                        name=t.text,
                        line=t.line,
                        body_open_tok=close + 1,
                        body_close_tok=body_close,
                        body_end_line=toks[body_close].line,
                        is_static=stmt_has_static,
                    )
                )
                _scan_body(toks, close + 1, body_close, t.text, scan)
                stmt_has_static = False
                i = body_close + 1
                continue
            if after == ";":
                scan.decls.append((t.text, t.line, stmt_has_static))
            # declaration or macro use at file scope: skip past the parens
            i = close + 1
            continue
        i += 1
    return scan


def _scan_body(toks: list[_Tok], open_idx: int, close_idx: int, caller: str, scan: _FileScan) -> None:
    j = open_idx + 1
    while j < close_idx:
        t = toks[j]
        # (*fp)(...) — call through a dereferenced function pointer
        if (
            t.text == "("
            and j + 4 < close_idx
            and toks[j + 1].text == "*"
            and _IDENT.fullmatch(toks[j + 2].text)
            and toks[j + 3].text == ")"
            and toks[j + 4].text == "("
        ):
            scan.indirect.append((t.line, f"function pointer {toks[j + 2].text!r} called in {caller}"))
            j += 4
            continue
        # table[i](...) — call through a function-pointer array
        if t.text == "]" and j + 1 < close_idx and toks[j + 1].text == "(":
            scan.indirect.append((t.line, f"indexed function pointer called in {caller}"))
            j += 1
            continue
        if _IDENT.fullmatch(t.text) and t.text not in _KEYWORDS and j + 1 < close_idx and toks[j + 1].text == "(":
            prev = toks[j - 1].text if j > 0 else ""
            if prev in (".",):
                scan.indirect.append((t.line, f"member function pointer {t.text!r} called in {caller}"))
                j += 1
                continue
            if prev == ">" and j >= 2 and toks[j - 2].text == "-":
                scan.indirect.append((t.line, f"member function pointer {t.text!r} called in {caller}"))
                j += 1
                continue
            prev_is_word = bool(_IDENT.fullmatch(prev)) if prev else False
            if prev_is_word and prev not in _CALL_OK_PREFIX_KEYWORDS:
                # `int foo(...)` — a local declaration, not a call
                j += 1
                continue
            scan.calls.append(_RawCall(caller=caller, name=t.text, line=t.line))
        j += 1


def _read_text(path: Path) -> str:
    try:
        return path.read_bytes().decode("utf-8", errors="replace")
    except OSError as exc:
        raise UnreadableSource(path, str(exc)) from exc


def build_call_graph(source_root, header_globs=DEFAULT_HEADER_GLOBS) -> CallGraph:
    """Scan a C source tree and return its direct-call graph.

    One FunctionRef per definition, one CallSite per syntactic direct call
    whose callee is defined in the tree.  Everything else lands in
    graph.diagnostics.
    """
    root = Path(source_root)
    if not root.is_dir():
        raise UnreadableSource(root, "not a directory")

    source_files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix in (".c", ".h"))
    if not source_files:
        raise NoFunctionsFound(f"no .c or .h files under {root}")

    header_paths: set[Path] = set()
    for pattern in header_globs:
        header_paths.update(p for p in root.glob(pattern) if p.is_file())

    scans: dict[Path, _FileScan] = {}
    texts: dict[Path, str] = {}
    for path in source_files:
        text = _read_text(path)
        texts[path] = text
        scans[path] = _scan_translation_unit(_blank_non_code(text))

    extern_declared: set[str] = set()
    for path in sorted(header_paths):
        if path not in scans:
            scans[path] = _scan_translation_unit(_blank_non_code(_read_text(path)))
        for name, _line, is_static in scans[path].decls:
            if not is_static:
                extern_declared.add(name)

    functions: dict[str, FunctionRef] = {}
    spans: dict[str, tuple[str, int, int]] = {}
    diagnostics: list[Diagnostic] = []
    for path in source_files:
        rel = str(path.relative_to(root))
        for d in scans[path].defs:
            if d.name in functions:
                diagnostics.append(
                    Diagnostic("duplicate_definition", rel, d.line, f"{d.name} already defined in {functions[d.name].file}")
                )
                continue
            functions[d.name] = FunctionRef(
                name=d.name,
                file=rel,
                line=d.line,
                is_extern_declared=d.name in extern_declared,
                is_main=d.name == "main",
            )
            spans[d.name] = (rel, d.line, d.body_end_line)

    if not functions:
        raise NoFunctionsFound(f"no function definitions under {root}")

    edges: list[CallSite] = []
    seen_edges: set[tuple[str, str, str, int]] = set()
    for path in source_files:
        rel = str(path.relative_to(root))
        for line, detail in scans[path].indirect:
            diagnostics.append(Diagnostic("indirect_call", rel, line, detail))
        for call in scans[path].calls:
            caller = functions.get(call.caller)
            if caller is None:
                continue  # caller definition was a duplicate; skip its calls
            callee = functions.get(call.name)
            if callee is None:
                diagnostics.append(
                    Diagnostic("unresolved_callee", rel, call.line, f"{call.caller} calls {call.name} (no definition in tree)")
                )
                continue
            key = (call.caller, call.name, rel, call.line)
            if key in seen_edges:
                continue
            seen_edges.add(key)
            edges.append(CallSite(caller=caller, callee=callee, file=rel, line=call.line))

    headers = sorted(str(p.relative_to(root)) for p in header_paths)
    return CallGraph(
        functions=functions,
        edges=edges,
        headers=headers,
        diagnostics=diagnostics,
        definition_spans=spans,
        source_root=str(root),
    )


def extract_function_source(graph: CallGraph, name: str) -> str:
    """Return the text of a function definition (signature through closing brace)."""
    if name not in graph.definition_spans:
        raise TargetNotInGraph(name)
    rel, first, last = graph.definition_spans[name]
    path = Path(graph.source_root) / rel
    lines = _read_text(path).splitlines()
    return "\n".join(lines[first - 1 : last]) + "\n"


def _adjacency_reversed(graph: CallGraph) -> dict[str, set[str]]:
    rev: dict[str, set[str]] = {name: set() for name in graph.functions}
    for e in graph.edges:
        if e.caller.name == e.callee.name:
            continue  # self-recursion recorded in the graph, never traversed
        rev[e.callee.name].add(e.caller.name)
    return rev


def _is_root(graph: CallGraph, name: str) -> bool:
    ref = graph.functions[name]
    return ref.is_main or ref.is_extern_declared or graph.in_degree(name) == 0


def enumerate_call_chains(graph: CallGraph, target: FunctionRef, max_depth: int = DEFAULT_MAX_DEPTH) -> list[CallChain]:
    """Every simple path of length <= max_depth ending at the target whose
    start is main, an extern-declared function, or a function with no
    in-edges.  Returned in canonical order (length, then name sequence)."""
    if target.name not in graph.functions:
        raise TargetNotInGraph(target.name)
    rev = _adjacency_reversed(graph)
    chains: list[CallChain] = []
    path = [target.name]
    on_path = {target.name}

    def walk():
        head = path[-1]
        if _is_root(graph, head):
            chains.append(CallChain(tuple(graph.functions[n] for n in reversed(path))))
        if len(path) >= max_depth:
            return
        for caller in sorted(rev[head]):
            if caller in on_path:
                continue
            path.append(caller)
            on_path.add(caller)
            walk()
            path.pop()
            on_path.remove(caller)

    walk()
    chains.sort(key=lambda c: (c.length, c.names))
    return chains


def select_available_chain(chains, graph: CallGraph) -> CallChain:
    """Pick the campaign's chain: shortest main-rooted, else shortest rooted
    at a header-declared extern function; ties broken by name sequence."""
    chains = list(chains)
    for chain in chains:
        for ref in chain.functions:
            if ref.name not in graph.functions:
                raise ValueError(f"chain function {ref.name!r} is not in the graph")
    if not chains:
        raise NoAvailableChain("no call chains to choose from")

    def best(candidates):
        return min(candidates, key=lambda c: (c.length, c.names))

    main_rooted = [c for c in chains if c.root.is_main]
    if main_rooted:
        return best(main_rooted)
    extern_rooted = [c for c in chains if c.root.is_extern_declared]
    if extern_rooted:
        return best(extern_rooted)
    raise NoAvailableChain("no chain starts at main or at an extern-declared header function")


def resolve_entry(chain: CallChain, graph: CallGraph | None = None) -> tuple[FunctionRef, str]:
    """Entry function for harness generation plus the template source file.

    main-rooted chains use the next function as entry with main's file as the
    template; otherwise the chain head is both entry and template origin.
    """
    head = chain.functions[0]
    head_file = head.file
    if graph is not None and head.name in graph.definition_spans:
        head_file = graph.definition_spans[head.name][0]
    if chain.length == 1:
        return chain.functions[0], head_file
    if head.is_main:
        return chain.functions[1], head_file
    return head, head_file


# --- JSON dumps (documented inspection formats) ---------------------------

GRAPH_SCHEMA = "chainfuzz-callgraph-v1"
CHAINS_SCHEMA = "chainfuzz-chains-v1"


def _ref_to_json(ref: FunctionRef) -> dict:
    return {
        "name": ref.name,
        "file": ref.file,
        "line": ref.line,
        "is_extern_declared": ref.is_extern_declared,
        "is_main": ref.is_main,
    }


def graph_to_json(graph: CallGraph) -> dict:
    return {
        "schema": GRAPH_SCHEMA,
        "source_root": graph.source_root,
        "functions": [_ref_to_json(graph.functions[n]) for n in sorted(graph.functions)],
        "edges": [
            {"caller": e.caller.name, "callee": e.callee.name, "file": e.file, "line": e.line}
            for e in sorted(graph.edges, key=lambda e: (e.file, e.line, e.caller.name, e.callee.name))
        ],
        "headers": list(graph.headers),
        "diagnostics": [
            {"kind": d.kind, "file": d.file, "line": d.line, "detail": d.detail}
            for d in sorted(graph.diagnostics, key=lambda d: (d.file, d.line, d.kind, d.detail))
        ],
    }


def chains_to_json(target: FunctionRef, max_depth: int, chains, selected: CallChain | None) -> dict:
    return {
        "schema": CHAINS_SCHEMA,
        "target": target.name,
        "max_depth": max_depth,
        "chains": [list(c.names) for c in chains],
        "selected": list(selected.names) if selected is not None else None,
    }


def dump_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
