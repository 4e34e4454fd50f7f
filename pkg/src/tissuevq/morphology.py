"""Ground-truth morphology parameters for synthetic tissue images.

A sample is described by the state of its three horizontal bands: the
keratin band on top, the epidermis in the middle, and the dermis at the
bottom. These parameters drive both the pixel renderer and the caption
grammar, so captions are consistent with pixels by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KERATIN_STYLES = (
    "basket_weave",
    "basket_weave_parakeratosis",
    "parakeratosis",
    "keratosis",
    "eroded",
)
KERATIN_MODIFIERS = ("thin", "thick", "fragmented", "detached")
DYSPLASIA_GRADES = ("normal", "mild", "moderate", "severe", "full_thickness")
DERMIS_STATES = ("normal", "abnormal", "solar_damaged", "inflammation", "displaced")


class MorphologyError(ValueError):
    """Raised for invalid morphology parameter combinations."""


def thin_threshold(size: int) -> int:
    """Largest keratin thickness (pixels) still described as 'thin'."""
    return size // 16


def thick_threshold(size: int) -> int:
    """Smallest keratin thickness (pixels) described as 'thick'."""
    return -(-size // 6)  # ceil(size / 6)


@dataclass(frozen=True)
class MorphologyParams:
    """Complete ground truth for one generated sample.

    ``keratin_modifiers`` is stored sorted for deterministic rendering and
    serialization. ``thin``/``thick`` must agree with ``keratin_thickness``
    relative to the per-size thresholds; validation happens against a
    concrete image size in :meth:`validate`.
    """

    keratin_thickness: int
    keratin_style: str
    keratin_modifiers: frozenset[str] = field(default_factory=frozenset)
    dysplasia_grade: str = "normal"
    dermis_state: str = "normal"
    stain_hue: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.keratin_thickness < 2:
            raise MorphologyError(
                f"keratin_thickness must be >= 2, got {self.keratin_thickness}"
            )
        if self.keratin_style not in KERATIN_STYLES:
            raise MorphologyError(f"unknown keratin_style {self.keratin_style!r}")
        bad = set(self.keratin_modifiers) - set(KERATIN_MODIFIERS)
        if bad:
            raise MorphologyError(f"unknown keratin modifiers {sorted(bad)}")
        if {"thin", "thick"} <= set(self.keratin_modifiers):
            raise MorphologyError("modifiers 'thin' and 'thick' are mutually exclusive")
        if self.dysplasia_grade not in DYSPLASIA_GRADES:
            raise MorphologyError(f"unknown dysplasia_grade {self.dysplasia_grade!r}")
        if self.dermis_state not in DERMIS_STATES:
            raise MorphologyError(f"unknown dermis_state {self.dermis_state!r}")
        if not 0.0 <= self.stain_hue <= 1.0:
            raise MorphologyError(f"stain_hue must be in [0, 1], got {self.stain_hue}")

    def validate(self, size: int) -> None:
        """Check thickness/modifier consistency against an image size."""
        mods = set(self.keratin_modifiers)
        if "thin" in mods and self.keratin_thickness > thin_threshold(size):
            raise MorphologyError(
                f"'thin' requires thickness <= {thin_threshold(size)} at size {size}, "
                f"got {self.keratin_thickness}"
            )
        if "thick" in mods and self.keratin_thickness < thick_threshold(size):
            raise MorphologyError(
                f"'thick' requires thickness >= {thick_threshold(size)} at size {size}, "
                f"got {self.keratin_thickness}"
            )
        if "thin" not in mods and self.keratin_thickness <= thin_threshold(size):
            raise MorphologyError(
                f"thickness {self.keratin_thickness} at size {size} requires the "
                "'thin' modifier"
            )
        if "thick" not in mods and self.keratin_thickness >= thick_threshold(size):
            raise MorphologyError(
                f"thickness {self.keratin_thickness} at size {size} requires the "
                "'thick' modifier"
            )

    def sorted_modifiers(self) -> list[str]:
        """Modifiers in canonical spoken order: thin/thick, fragmented, detached."""
        order = {name: i for i, name in enumerate(KERATIN_MODIFIERS)}
        return sorted(self.keratin_modifiers, key=order.__getitem__)


def derive_thickness_modifier(thickness: int, size: int) -> str | None:
    """Return 'thin', 'thick', or None for a thickness at the given size."""
    if thickness <= thin_threshold(size):
        return "thin"
    if thickness >= thick_threshold(size):
        return "thick"
    return None
