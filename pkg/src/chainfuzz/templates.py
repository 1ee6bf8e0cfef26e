"""Built-in prompt templates for every generation stage.

Slots use ``$name`` placeholders (string.Template syntax) so C and Python
code can be substituted without brace escaping.  Each body opens with a
stable task marker line; test harnesses key scripted responses off it.
"""

from __future__ import annotations

CONDITION_ANALYSIS = """\
# Task: call-edge execution-condition analysis

You are auditing why one C function transfers control to another.
Caller function: $caller_name
Callee function: $callee_name

Caller source:
```c
$caller_source
```

Work through three steps:
1. Locate the call: the line number (relative to the caller source above,
   1-based) and the surrounding statement where $callee_name is invoked.
2. Identify the decision variables that control whether that call executes
   (parameters, globals, or locals of the caller).
3. State the conditions those variables must satisfy for the call to occur,
   as logical predicates (equalities, inequalities, ranges, memberships).

Reply with exactly one fenced JSON object, no prose outside it:
```json
{
  "call_location": {"line": <int>, "snippet": "<statement>"},
  "decision_variables": [{"name": "<identifier>", "origin": "parameter|global|local"}],
  "constraints": [
    {"variable": "<identifier>", "kind": "equality|inequality|range|membership|predicate",
     "expression": "<predicate text>", "bounds": [<low>, <high>]}
  ]
}
```
Omit "bounds" unless kind is "range". Every constraint variable must appear
in decision_variables. Use an empty list when the call is unconditional.
"""

HARNESS_GENERATION = """\
# Task: target harness generation

Write a complete C program that drives execution down one call chain to a
target function so a fuzzing engine can exercise it.

Target description:
$target_description

Call chain (entry first, target last):
$call_chain

Entry function to invoke from the harness:
$entry_function

Execution conditions collected along the chain:
$execution_conditions

Source of the functions on the chain:
$function_sources

Template source file (shows how the entry function is normally set up):
```c
$template_source
```

Requirements:
- The harness must take exactly one positional argument: the path of the
  input file. Read that file and hand its contents to the entry function the
  same way the template file does.
- Keep execution focused on the chain above; do not call unrelated API.
- Include every header the entry function needs. Do not define functions
  that the library already provides.
- Return 0 on success, nonzero on rejection. Never call abort() yourself.

Reply with exactly one fenced C code block containing the full harness.
"""

INPUT_GENERATION = """\
# Task: reachable input generation

Write a Python 3 script that builds one input file satisfying every
execution condition below, so the compiled harness reaches the target
function.

Execution conditions (per call edge, in chain order):
$execution_conditions

Harness source:
```c
$harness_source
```

Attempt number: $attempt
$feedback

Rules for the script:
- It receives the output path as sys.argv[1] and must write the input bytes
  to that file; write nothing else.
- Satisfy equality constraints with the exact required values. For range
  constraints pick values well inside the bounds, never at the edges.
- Use Python's standard libraries (struct, binascii, ...) to build binary
  fields precisely.
- The script must be deterministic: no randomness, no network, no reading
  other files.

Reply with exactly one fenced Python code block.
"""

MUTATOR_GENERATION = """\
# Task: target-specific mutator generation ($step)

Target description:
$target_description

Target function source:
```c
$target_source
```

Seed-producing script (shows the input format the campaign starts from):
```python
$seed_script
```

$prior_sections
Custom mutator interface documentation:
$api_docs

Reference mutator examples:
$examples

$step_instructions
"""

MUTATOR_STEP_ANALYSIS = """\
Step 1 of 3 — root-cause analysis. Explain, in prose, the root cause of the
weakness in the target function and the program states required to trigger
it. Name the exact variables, fields, and boundary conditions involved.
Reply with prose only, no code."""

MUTATOR_STEP_STRATEGY = """\
Step 2 of 3 — mutation strategy. Using the analysis above, design a mutation
strategy that drives inputs toward the triggering states: which bytes or
fields to mutate, toward which extreme values or ranges, and which bytes
must be preserved so the input keeps satisfying the call-chain conditions.
Reply with prose only, no code."""

MUTATOR_STEP_CODE = """\
Step 3 of 3 — mutator code. Implement the strategy as a C custom mutator
conforming to the interface documentation above: define afl_custom_init,
afl_custom_fuzz, and afl_custom_deinit exactly as documented, derive all
randomness from the init seed, keep the hot path allocation-free, and never
return more than max_size bytes. Reply with exactly one fenced C code
block."""

REPAIR_REFINEMENT = """\
# Task: compilation repair ($phase)

A generated C fuzzing harness fails to build against the library.

Compiler error query:
$error_query

$task_instructions

Context:
$context

Working material:
$working_material
"""

REPAIR_PHASE_GATHER = """\
Study the library snippet in Context and extract everything relevant to the
errors: correct signatures, required headers, types, and usage patterns.
Reply with concise notes."""

REPAIR_PHASE_REFINE = """\
Working material holds the notes gathered so far. Merge in whatever the new
library snippet in Context adds or corrects. Reply with the full updated
notes."""

REPAIR_PHASE_REVISE = """\
Context holds repair notes about the library; Working material holds the
harness source that fails to compile. Apply the notes and fix every error
in the query. Reply with exactly one fenced C code block containing the
complete revised harness."""
