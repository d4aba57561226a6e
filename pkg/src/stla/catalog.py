"""Built-in example systems used throughout the docs and regression tests."""

from __future__ import annotations

from .systems import LoadedConfig, load_config

_ROTATION = """\
[system]
name = "rotation"
state = ["x", "y"]
sigma = [["-y"], ["x"]]

[target]
u = "y - 1"

[analysis]
point = [0.0, 1.0]
"""

# The planar constant-field example: a single vertical field against the
# complement of the unit disk, so first-order transversality fails exactly
# on the y = 0 axis while the disk curvature still gives a crossing.
_CONSTANT_FIELD = """\
[system]
name = "constant-field"
state = ["x", "y"]
sigma = [["0"], ["1"]]

[target]
u = "(1 - x^2 - y^2)/2"

[analysis]
point = [1.0, 0.0]
"""

_SHEAR = """\
[system]
name = "shear"
state = ["x", "y"]
sigma = [["y", "0"], ["0", "1"]]

[target]
u = "(x^2 + y^2)/2"

[analysis]
point = [1.0, 0.0]
"""

_HEISENBERG = """\
[system]
name = "heisenberg"
state = ["x", "y", "z"]
sigma = [["1", "0"], ["0", "1"], ["y", "-x"]]

[target]
u = "(x^2 + y^2 + z^2)/2"

[analysis]
point = [0.0, 0.0, 1.0]
"""

_DUBINS = """\
[system]
name = "dubins"
state = ["x", "y", "z"]
sigma = [["cos(z)", "0"], ["sin(z)", "0"], ["0", "1"]]

[target]
u = "(x^2 + y^2 + z^2)/2"

[analysis]
point = [0.0, 1.0, 0.0]
"""

CATALOG_TEXT = {
    "rotation": _ROTATION,
    "constant-field": _CONSTANT_FIELD,
    "shear": _SHEAR,
    "heisenberg": _HEISENBERG,
    "dubins": _DUBINS,
}

CATALOG_NAMES = tuple(CATALOG_TEXT)


class UnknownCatalogEntry(KeyError):
    def __init__(self, name: str):
        valid = ", ".join(CATALOG_NAMES)
        super().__init__(f"unknown catalog entry {name!r}; valid names: {valid}")
        self.name = name


def catalog_text(name: str) -> str:
    try:
        return CATALOG_TEXT[name]
    except KeyError:
        raise UnknownCatalogEntry(name) from None


def catalog_lookup(name: str) -> LoadedConfig:
    """System, target, and default analysis point for a built-in example."""
    return load_config(catalog_text(name))
