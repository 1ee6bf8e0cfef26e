"""Out-of-process mutator validation probe.

Runs as ``python -m chainfuzz.mutator_probe SO_PATH SEED_FILE DURATION_S``
in a supervised subprocess: a mutator that aborts or corrupts memory kills
the probe, not the campaign.  Prints one JSON report line on stdout.

Exit codes: 0 = sampled, 3 = mutator failed to load.
"""

from __future__ import annotations

import json
import sys
import time

from .errors import EngineLoadFailure
from .mutbridge import DEFAULT_MAX_SIZE, LoadedMutator

PROBE_RNG_SEED = 0x5EED


def sample(so_path, seed_bytes: bytes, duration_s: float) -> dict:
    executions = 0
    nonempty = False
    differing = False
    oversized = 0
    with LoadedMutator(so_path, PROBE_RNG_SEED) as mut:
        start = time.perf_counter()
        while time.perf_counter() - start < duration_s:
            try:
                out = mut.fuzz(seed_bytes, donor=seed_bytes, max_size=DEFAULT_MAX_SIZE)
            except ValueError:
                oversized += 1
                executions += 1
                continue
            executions += 1
            if out:
                nonempty = True
                if out != seed_bytes:
                    differing = True
        elapsed = time.perf_counter() - start
    return {
        "executions": executions,
        "elapsed_s": elapsed,
        "nonempty": nonempty,
        "differing": differing,
        "oversized": oversized,
    }


def main(argv=None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 3:
        print(json.dumps({"error": "usage: mutator_probe SO_PATH SEED_FILE DURATION_S"}))
        return 2
    so_path, seed_file, duration = argv
    with open(seed_file, "rb") as fh:
        seed_bytes = fh.read()
    try:
        report = sample(so_path, seed_bytes, float(duration))
    except EngineLoadFailure as exc:
        print(json.dumps({"load_error": str(exc)}))
        return 3
    print(json.dumps(report))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
