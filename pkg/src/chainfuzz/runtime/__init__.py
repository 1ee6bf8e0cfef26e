"""Bundled C runtime pieces: the function-trace shim linked into
instrumented builds and the custom-mutator ABI header + docs."""

from importlib import resources


def runtime_path(name: str) -> str:
    """Absolute path of a bundled runtime file (functrace.c, custom_mutator.h, ...)."""
    return str(resources.files(__package__).joinpath(name))
