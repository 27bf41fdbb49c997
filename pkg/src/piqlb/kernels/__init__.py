"""Kernel dispatch: compiled extension when available, numpy otherwise.

The two lanes expose an identical module-level API (``dpf_eval_batch``,
``dcf_eval_batch``, ``masked_bit_sum``, ``gather``) and must produce
bit-identical outputs; a test suite holds them to that. Selection happens
once at import. ``PIQLB_KERNELS=py`` or ``=native`` forces a lane, which
the benchmark harness uses to compare both.
"""

from __future__ import annotations

import importlib
import os

from . import _py

_FORCED = os.environ.get("PIQLB_KERNELS", "").strip().lower()

_native = None
if _FORCED != "py":
    try:
        _native = importlib.import_module(__name__ + "._native")
    except ImportError:
        if _FORCED == "native":
            raise ImportError(
                "PIQLB_KERNELS=native but the compiled kernel is not built; "
                "run `pip install -e .` or unset PIQLB_KERNELS"
            )

_active = _native if _native is not None else _py


def active() -> str:
    """Name of the kernel lane in use ('native' or 'python')."""
    return _active.NAME


def lanes() -> dict[str, object]:
    """All importable kernel lanes, keyed by name."""
    out: dict[str, object] = {_py.NAME: _py}
    if _native is not None:
        out[_native.NAME] = _native
    return out


def use(name: str) -> str:
    """Swap the active lane (benchmark/test hook). Returns the old name."""
    global _active, dpf_eval_batch, dcf_eval_batch, masked_bit_sum, gather
    mod = lanes().get(name)
    if mod is None:
        raise KeyError(f"kernel lane {name!r} not available "
                       f"(have {sorted(lanes())})")
    old = _active.NAME
    _active = mod
    dpf_eval_batch = mod.dpf_eval_batch
    dcf_eval_batch = mod.dcf_eval_batch
    masked_bit_sum = mod.masked_bit_sum
    gather = mod.gather
    return old


dpf_eval_batch = _active.dpf_eval_batch
dcf_eval_batch = _active.dcf_eval_batch
masked_bit_sum = _active.masked_bit_sum
gather = _active.gather
