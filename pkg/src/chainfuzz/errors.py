"""Exception hierarchy for the chainfuzz pipeline.

Every stage raises subclasses of ChainfuzzError so the CLI can attribute a
failure to its stage and exit with a stable code.
"""

from __future__ import annotations


class ChainfuzzError(Exception):
    """Base class for all pipeline errors."""


# --- call graph ---------------------------------------------------------


class UnreadableSource(ChainfuzzError):
    def __init__(self, path, reason=""):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"cannot read source file {path}" + (f": {reason}" if reason else ""))


class NoFunctionsFound(ChainfuzzError):
    pass


class TargetNotInGraph(ChainfuzzError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"target function {name!r} is not defined in the call graph")


class NoAvailableChain(ChainfuzzError):
    pass


# --- conditions ---------------------------------------------------------


class MalformedResponse(ChainfuzzError):
    """Model output failed schema validation (first violation recorded)."""

    def __init__(self, violation):
        self.violation = violation
        super().__init__(violation)


class CallNotFound(ChainfuzzError):
    def __init__(self, callee, caller=""):
        self.callee = callee
        super().__init__(f"no call to {callee!r} found" + (f" in {caller}" if caller else ""))


# --- gateway ------------------------------------------------------------


class MissingSlot(ChainfuzzError):
    def __init__(self, name):
        self.slot = name
        super().__init__(f"prompt slot {name!r} is required but was not provided")


class UnknownSlot(ChainfuzzError):
    def __init__(self, name):
        self.slot = name
        super().__init__(f"prompt slot {name!r} is not declared by the template")


class ReplayMiss(ChainfuzzError):
    def __init__(self, fingerprint):
        self.fingerprint = fingerprint
        super().__init__(f"no cassette entry for fingerprint {fingerprint}")


class TransportError(ChainfuzzError):
    pass


class RateLimited(ChainfuzzError):
    def __init__(self, message="rate limited", retry_after=None):
        self.retry_after = retry_after
        super().__init__(message)


# --- rag repair ---------------------------------------------------------


class UnreadableFile(ChainfuzzError):
    def __init__(self, path, reason=""):
        self.path = str(path)
        super().__init__(f"cannot read {path}" + (f": {reason}" if reason else ""))


class EmptyErrorSet(ChainfuzzError):
    pass


class DimensionMismatch(ChainfuzzError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"query vector has dimension {got}, index expects {expected}")


class EmbedderMismatch(ChainfuzzError):
    def __init__(self, expected, got):
        super().__init__(f"index was built with embedder {got!r}, configuration expects {expected!r}")


# --- builds (harness + mutator) -----------------------------------------


class CompilerNotFound(ChainfuzzError):
    def __init__(self, command):
        self.command = command
        super().__init__(f"compiler executable not found: {command}")


class BuildTimeout(ChainfuzzError):
    def __init__(self, seconds):
        self.seconds = seconds
        super().__init__(f"build exceeded {seconds}s")


class RepairExhausted(ChainfuzzError):
    """Harness still failing to compile after the configured repair rounds."""

    def __init__(self, history):
        self.history = history
        super().__init__(f"compilation repair exhausted after {len(history)} round(s)")


class HarnessContractViolation(ChainfuzzError):
    def __init__(self, detail):
        super().__init__(f"generated harness violates the input-file contract: {detail}")


# --- input generation ---------------------------------------------------


class ScriptCrash(ChainfuzzError):
    def __init__(self, exit_code, stderr):
        self.exit_code = exit_code
        self.stderr = stderr
        super().__init__(f"seed script exited with code {exit_code}")


class ScriptTimeout(ChainfuzzError):
    def __init__(self, seconds):
        self.seconds = seconds
        super().__init__(f"seed script exceeded {seconds}s")


class OutputMissing(ChainfuzzError):
    pass


class OutputTooLarge(ChainfuzzError):
    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"seed script wrote {size} bytes, cap is {cap}")


class ExecFailure(ChainfuzzError):
    pass


class ReachabilityExhausted(ChainfuzzError):
    """All input-generation attempts failed to reach the target.

    ``history`` holds one entry per attempt: (attempt, deepest_function, note).
    """

    def __init__(self, history):
        self.history = history
        super().__init__(f"no reachable input after {len(history)} attempt(s)")


# --- mutator generation -------------------------------------------------


class MissingEntryPoint(ChainfuzzError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"generated mutator does not define required entry point {name!r}")


class MutatorRepairExhausted(ChainfuzzError):
    def __init__(self, history):
        self.history = history
        super().__init__(f"mutator still failing to build after {len(history)} round(s)")


class EngineLoadFailure(ChainfuzzError):
    pass


# --- campaign -----------------------------------------------------------


class EngineCrash(ChainfuzzError):
    pass


class BudgetZero(ChainfuzzError):
    pass


class EmptyQueue(ChainfuzzError):
    pass


# --- cli ----------------------------------------------------------------


class IncompleteWorkspace(ChainfuzzError):
    def __init__(self, workspace, missing):
        self.workspace = str(workspace)
        self.missing = missing
        super().__init__(f"workspace {workspace} has no {missing}; run the campaign first")
