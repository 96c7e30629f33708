"""Diffeomorphic registration of orientation distribution function volumes."""

from ._odfreg import (
    DataError,
    Deformation,
    Field,
    NumericError,
    Registration,
    UsageError,
    __version__,
    apply,
    dice,
    evaluate,
    load,
    load_deformation,
    phantom,
    phantom_mask,
    register_fields,
    render_svg,
    save,
    save_deformation,
)

__all__ = [
    "DataError",
    "Deformation",
    "Field",
    "NumericError",
    "Registration",
    "UsageError",
    "__version__",
    "apply",
    "dice",
    "evaluate",
    "load",
    "load_deformation",
    "phantom",
    "phantom_mask",
    "register_fields",
    "render_svg",
    "save",
    "save_deformation",
]
