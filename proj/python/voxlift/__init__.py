from ._voxlift import (
    Error,
    Field,
    InvalidArgument,
    IoError,
    StageError,
    alpha_bar,
    load_image,
    reconstruct,
    save_image,
    segment,
    write_fixture,
)

__all__ = [
    "Error",
    "Field",
    "InvalidArgument",
    "IoError",
    "StageError",
    "alpha_bar",
    "load_image",
    "reconstruct",
    "save_image",
    "segment",
    "write_fixture",
]
