"""Fuzzing engines.

BuiltinEngine is a small deterministic coverage-guided engine for hermetic
runs: queue admission is keyed on novel function-hit sets, mutations come
from the loaded custom mutator or from builtin havoc, and every decision
derives from the run's rng_seed.  ExternalEngineAdapter supervises a host
fuzzer process (AFL++-style directory layout) and ingests its queue and
crash files by mtime.
"""

from __future__ import annotations

import logging
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

import random

from .errors import EngineCrash
from .mutbridge import LoadedMutator
from .tracing import Tracer

log = logging.getLogger(__name__)

DEFAULT_SEED_INPUT = b"seed\n"  # engine default when no reachable seed is supplied
DEFAULT_MAX_INPUT_SIZE = 1 << 16
DEFAULT_EXEC_TIMEOUT = 2.0

INTERESTING_8 = (0, 1, 16, 32, 64, 100, 127, 128, 255)
INTERESTING_16 = (0, 1, 255, 256, 512, 1024, 4096, 32767, 65535)


def havoc_mutate(rng: random.Random, data: bytes, donor: bytes, max_size: int) -> bytes:
    """Stacked byte-level havoc: flips, interesting values, inserts, deletes,
    splices.  Deterministic for a given rng state."""
    out = bytearray(data if data else b"\x00")
    for _ in range(1 + rng.randrange(6)):
        op = rng.randrange(6)
        if op == 0:  # flip one bit
            i = rng.randrange(len(out))
            out[i] ^= 1 << rng.randrange(8)
        elif op == 1:  # overwrite with an interesting byte
            out[rng.randrange(len(out))] = rng.choice(INTERESTING_8)
        elif op == 2:  # overwrite 2 bytes with an interesting word (LE)
            if len(out) >= 2:
                i = rng.randrange(len(out) - 1)
                v = rng.choice(INTERESTING_16)
                out[i] = v & 0xFF
                out[i + 1] = (v >> 8) & 0xFF
        elif op == 3:  # insert a small random block
            if len(out) < max_size:
                i = rng.randrange(len(out) + 1)
                block = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 9)))
                out[i:i] = block[: max_size - len(out)]
        elif op == 4:  # delete a small block
            if len(out) > 1:
                i = rng.randrange(len(out))
                del out[i : i + rng.randrange(1, 9)]
                if not out:
                    out = bytearray(b"\x00")
        else:  # splice a donor slice in
            if donor:
                i = rng.randrange(len(out) + 1)
                j = rng.randrange(len(donor))
                block = donor[j : j + rng.randrange(1, 17)]
                out[i : i + len(block)] = block
    return bytes(out[:max_size])


@dataclass
class QueueEntry:
    id: int
    data: bytes
    discovered_at: float
    hits_target: bool | None = None  # authoritative value comes from coverage replay


@dataclass
class CrashRecord:
    data: bytes
    discovered_at: float
    signature: str
    hits_target: bool


@dataclass
class EngineResult:
    queue: list[QueueEntry]
    crashes: list[CrashRecord]
    executions: int
    elapsed: float
    stopped_on_exploit: bool
    first_reach_time: float | None
    first_target_crash_time: float | None


@dataclass
class BuiltinEngine:
    harness_binary: Path
    target_name: str
    rng_seed: int
    budget_s: float
    stop_on_exploit: bool = True
    mutator_path: Path | None = None
    max_input_size: int = DEFAULT_MAX_INPUT_SIZE
    exec_timeout: float = DEFAULT_EXEC_TIMEOUT
    max_execs: int | None = None

    def run(self, seed_bytes: bytes) -> EngineResult:
        rng = random.Random(self.rng_seed)
        tracer = Tracer(self.harness_binary, timeout=self.exec_timeout)
        mutator = None
        if self.mutator_path is not None:
            mutator = LoadedMutator(self.mutator_path, seed=rng.randrange(1 << 32))
        try:
            return self._loop(rng, tracer, mutator, seed_bytes)
        except EngineCrash:
            raise
        except Exception as exc:  # engine internals must not masquerade as campaign results
            raise EngineCrash(f"builtin engine failed: {exc}") from exc
        finally:
            if mutator is not None:
                mutator.close()

    def _loop(self, rng, tracer, mutator, seed_bytes: bytes) -> EngineResult:
        start = time.perf_counter()
        elapsed = lambda: time.perf_counter() - start  # noqa: E731

        queue: list[QueueEntry] = []
        crashes: list[CrashRecord] = []
        seen_coverage: set[frozenset] = set()
        executions = 0
        first_reach = None
        first_target_crash = None
        stopped_on_exploit = False
        next_id = 0

        def observe(data: bytes, now: float):
            nonlocal executions, first_reach, first_target_crash, next_id, stopped_on_exploit
            result = tracer.run_on_input(data)
            executions += 1
            hits = self.target_name in result.trace.functions_hit
            if hits and first_reach is None:
                first_reach = now
            if result.crashed:
                signature = f"sig{-result.returncode}:{'target' if hits else 'offtarget'}"
                crashes.append(CrashRecord(data=data, discovered_at=now, signature=signature, hits_target=hits))
                if hits:
                    if first_target_crash is None:
                        first_target_crash = now
                    if self.stop_on_exploit:
                        stopped_on_exploit = True
                return
            if result.timed_out:
                return
            coverage = result.trace.functions_hit
            if coverage not in seen_coverage:
                seen_coverage.add(coverage)
                queue.append(QueueEntry(id=next_id, data=data, discovered_at=now, hits_target=hits))
                next_id += 1

        observe(seed_bytes[: self.max_input_size], elapsed())
        if not queue and not crashes:
            # seed timed out; keep it anyway so mutation has a parent
            queue.append(QueueEntry(id=0, data=seed_bytes[: self.max_input_size], discovered_at=elapsed()))
            next_id = 1

        while not stopped_on_exploit and elapsed() < self.budget_s:
            if self.max_execs is not None and executions >= self.max_execs:
                break
            if not queue:
                queue.append(QueueEntry(id=next_id, data=DEFAULT_SEED_INPUT, discovered_at=elapsed()))
                next_id += 1
            parent = queue[rng.randrange(len(queue))]
            donor = queue[rng.randrange(len(queue))]
            if mutator is not None:
                candidate = mutator.fuzz(parent.data, donor=donor.data, max_size=self.max_input_size)
            else:
                candidate = havoc_mutate(rng, parent.data, donor.data, self.max_input_size)
            if not candidate:
                continue
            observe(candidate, elapsed())

        return EngineResult(
            queue=queue,
            crashes=crashes,
            executions=executions,
            elapsed=elapsed(),
            stopped_on_exploit=stopped_on_exploit,
            first_reach_time=first_reach,
            first_target_crash_time=first_target_crash,
        )


# --- external engine adapter -------------------------------------------------


@dataclass
class ExternalEngineConfig:
    """Supervision settings for a host fuzzer (AFL++-style directories).

    command tokens: $harness, $seed_dir, $out_dir expand before launch.
    """

    command: tuple[str, ...]
    out_dir: str
    queue_subdir: str = "default/queue"
    crashes_subdir: str = "default/crashes"
    poll_interval_s: float = 1.0
    mutator_env_var: str = "AFL_CUSTOM_MUTATOR_LIBRARY"


@dataclass
class ExternalEngineAdapter:
    config: ExternalEngineConfig
    harness_binary: Path
    budget_s: float
    mutator_path: Path | None = None

    def _expand(self, seed_dir: Path) -> list[str]:
        values = {
            "$harness": str(self.harness_binary),
            "$seed_dir": str(seed_dir),
            "$out_dir": str(self.config.out_dir),
        }
        return [values.get(tok, tok) for tok in self.config.command]

    def run(self, seed_bytes: bytes, workdir) -> EngineResult:
        import os

        workdir = Path(workdir)
        seed_dir = workdir / "engine_seeds"
        seed_dir.mkdir(parents=True, exist_ok=True)
        (seed_dir / "seed0.bin").write_bytes(seed_bytes)
        env = dict(os.environ)
        if self.mutator_path is not None:
            env[self.config.mutator_env_var] = str(self.mutator_path)
        argv = self._expand(seed_dir)
        start = time.time()
        try:
            proc = subprocess.Popen(argv, env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        except OSError as exc:
            raise EngineCrash(f"cannot launch external engine {argv[0]!r}: {exc}") from exc
        queue, crashes = [], []
        try:
            while time.time() - start < self.budget_s:
                self.poll_directories(start, queue, crashes)
                if proc.poll() is not None:
                    break
                time.sleep(self.config.poll_interval_s)
        finally:
            if proc.poll() is None:
                proc.terminate()
                try:
                    proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()
        self.poll_directories(start, queue, crashes)
        return EngineResult(
            queue=queue,
            crashes=crashes,
            executions=0,  # the host engine owns its exec counter
            elapsed=time.time() - start,
            stopped_on_exploit=False,
            first_reach_time=None,  # filled by coverage replay
            first_target_crash_time=None,
        )

    def poll_directories(self, start: float, queue: list, crashes: list) -> None:
        """Ingest new queue/crash files, timestamped by file mtime."""
        out = Path(self.config.out_dir)
        seen_q = {e.id for e in queue}
        for i, path in enumerate(self._files(out / self.config.queue_subdir)):
            if i in seen_q:
                continue
            queue.append(
                QueueEntry(id=i, data=path.read_bytes(), discovered_at=max(path.stat().st_mtime - start, 0.0))
            )
        seen_c = len(crashes)
        files = self._files(out / self.config.crashes_subdir)
        for path in files[seen_c:]:
            crashes.append(
                CrashRecord(
                    data=path.read_bytes(),
                    discovered_at=max(path.stat().st_mtime - start, 0.0),
                    signature=f"external:{path.name}",
                    hits_target=False,  # attributed later by replay
                )
            )

    @staticmethod
    def _files(directory: Path) -> list[Path]:
        if not directory.is_dir():
            return []
        entries = [p for p in directory.iterdir() if p.is_file() and p.name != "README.txt"]
        return sorted(entries, key=lambda p: (p.stat().st_mtime, p.name))
