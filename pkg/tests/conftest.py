import json
import subprocess
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "corpus"
FIXTURES_DIR = Path(__file__).resolve().parent / "fixtures"

GATE_HARNESS_SOURCE = """\
#include <stdio.h>
#include <stdlib.h>

#include "gate.h"

int main(int argc, char **argv)
{
    FILE *fp;
    unsigned char buf[4096];
    size_t n;

    if (argc < 2)
        return 2;
    fp = fopen(argv[1], "rb");
    if (fp == NULL)
        return 1;
    n = fread(buf, 1, sizeof(buf), fp);
    fclose(fp);
    return gate(buf, n) < 0 ? 1 : 0;
}
"""


def corpus_meta(name: str) -> dict:
    return json.loads((CORPUS_DIR / name / "target.json").read_text())


def gate_build_config():
    from chainfuzz.build import BuildConfig

    gate_dir = CORPUS_DIR / "magic_gate"
    return BuildConfig(include_dirs=(str(gate_dir),), libraries=(str(gate_dir / "gate.c"),))


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture(scope="session")
def corpus_built(corpus_dir) -> Path:
    """Build every corpus target once per session (instrumented + fast)."""
    subprocess.run(["make", "-s", "all"], cwd=corpus_dir, check=True)
    return corpus_dir


@pytest.fixture(scope="session")
def reference_mutator(corpus_built) -> Path:
    return corpus_built / "mutators" / "bin" / "reference_mutator.so"


@pytest.fixture(scope="session")
def gate_harness(tmp_path_factory, corpus_dir):
    """Compiled magic_gate harness artifact (instrumented + fast)."""
    from chainfuzz.harness import HarnessArtifact, compile_harness

    workdir = tmp_path_factory.mktemp("gate_harness")
    artifact = compile_harness(GATE_HARNESS_SOURCE, gate_build_config(), workdir)
    assert isinstance(artifact, HarnessArtifact), artifact
    return artifact


@pytest.fixture(scope="session")
def gate_crusher_mutator(tmp_path_factory):
    """The scripted GATE mutator compiled to a loadable shared object."""
    from chainfuzz.build import BuildConfig
    from chainfuzz.mutatorgen import compile_mutator

    source = (FIXTURES_DIR / "llm" / "magic_gate" / "mutator.c").read_text()
    workdir = tmp_path_factory.mktemp("gate_crusher")
    binary = compile_mutator(source, BuildConfig(), workdir)
    assert isinstance(binary, Path), binary
    return binary
