"""One-step drag editing engine (C++ core)."""

import json as _json

from ._dragwarp import (
    GeometryError,
    ValidationError,
    drag_fidelity,
    fill_nulls,
    instruction_weights,
    load_image,
    normalize_drag_spec,
    reference_circle,
    relocate,
    save_image,
    stretch_factor,
    warpage_field,
    weights_checksum,
)
from . import _dragwarp

__all__ = [
    "GeometryError",
    "ValidationError",
    "drag_fidelity",
    "edit",
    "fill_nulls",
    "instruction_weights",
    "load_image",
    "normalize_drag_spec",
    "reconstruct",
    "reference_circle",
    "relocate",
    "save_image",
    "stretch_factor",
    "warpage_field",
    "weights_checksum",
]


def edit(image, mask, instructions, mode="stretch", config=None):
    """Run one drag edit.

    ``instructions`` is a list of ``((hx, hy), (tx, ty))`` pairs in pixel
    coordinates; ``config`` uses the same camelCase keys as the JSON spec.
    Returns ``(image, diagnostics)``.
    """
    out, diag = _dragwarp.edit(image, mask, instructions, mode, _json.dumps(config or {}))
    return out, _json.loads(diag)


def reconstruct(image, config=None):
    """Encode, invert, sample and decode without any warp."""
    return _dragwarp.reconstruct(image, _json.dumps(config or {}))
