"""ctypes bridge to custom-mutator shared objects (the ABI documented in
runtime/custom_mutator.h, AFL++-compatible entry points)."""

from __future__ import annotations

import ctypes
from pathlib import Path

from .errors import EngineLoadFailure

REQUIRED_ENTRY_POINTS = ("afl_custom_init", "afl_custom_fuzz", "afl_custom_deinit")

DEFAULT_MAX_SIZE = 1 << 20


class LoadedMutator:
    """One dlopen'd mutator instance; all calls stay on the loading thread."""

    def __init__(self, so_path, seed: int):
        path = Path(so_path)
        try:
            self._lib = ctypes.CDLL(str(path))
        except OSError as exc:
            raise EngineLoadFailure(f"cannot load mutator {path}: {exc}") from exc
        for symbol in REQUIRED_ENTRY_POINTS:
            if not hasattr(self._lib, symbol):
                raise EngineLoadFailure(f"mutator {path} does not export {symbol}")

        self._init = self._lib.afl_custom_init
        self._init.restype = ctypes.c_void_p
        self._init.argtypes = [ctypes.c_void_p, ctypes.c_uint]

        self._fuzz = self._lib.afl_custom_fuzz
        self._fuzz.restype = ctypes.c_size_t
        self._fuzz.argtypes = [
            ctypes.c_void_p,
            ctypes.POINTER(ctypes.c_ubyte),
            ctypes.c_size_t,
            ctypes.POINTER(ctypes.POINTER(ctypes.c_ubyte)),
            ctypes.POINTER(ctypes.c_ubyte),
            ctypes.c_size_t,
            ctypes.c_size_t,
        ]

        self._deinit = self._lib.afl_custom_deinit
        self._deinit.restype = None
        self._deinit.argtypes = [ctypes.c_void_p]

        self._handle = self._init(None, seed & 0xFFFFFFFF)
        self._closed = False

    def fuzz(self, data: bytes, donor: bytes | None = None, max_size: int = DEFAULT_MAX_SIZE) -> bytes:
        """One mutation round. Oversized returns raise EngineLoadFailure-free
        ValueError so callers can count ABI violations."""
        buf = (ctypes.c_ubyte * max(len(data), 1)).from_buffer_copy(data or b"\x00")
        out_ptr = ctypes.POINTER(ctypes.c_ubyte)()
        if donor:
            add_buf = (ctypes.c_ubyte * len(donor)).from_buffer_copy(donor)
            add_len = len(donor)
        else:
            add_buf = None
            add_len = 0
        n = self._fuzz(
            self._handle,
            buf,
            len(data),
            ctypes.byref(out_ptr),
            add_buf,
            add_len,
            max_size,
        )
        if n == 0:
            return b""
        if n > max_size:
            raise ValueError(f"mutator returned {n} bytes, max_size is {max_size}")
        return ctypes.string_at(out_ptr, n)

    def close(self) -> None:
        if not self._closed:
            self._deinit(self._handle)
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def exported_symbols(so_path) -> set[str]:
    """Dynamic symbol names of a shared object (via nm -D)."""
    import subprocess

    proc = subprocess.run(["nm", "-D", str(so_path)], capture_output=True, text=True)
    if proc.returncode != 0:
        raise EngineLoadFailure(f"cannot enumerate symbols of {so_path}: {proc.stderr.strip()}")
    names = set()
    for line in proc.stdout.splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[-2] in ("T", "t", "W", "w"):
            names.add(parts[-1])
    return names
