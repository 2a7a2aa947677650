from ._core import (
    CoordGrid,
    Generator,
    __version__,
    features,
    make_grid,
    make_procedural,
    parent_window,
    pfd,
    profile,
    rcrop,
    stage_density,
    train,
)

__all__ = [
    "CoordGrid",
    "Generator",
    "__version__",
    "features",
    "make_grid",
    "make_procedural",
    "parent_window",
    "pfd",
    "profile",
    "rcrop",
    "stage_density",
    "train",
]
