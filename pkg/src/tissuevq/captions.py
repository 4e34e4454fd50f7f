"""Controlled three-sentence caption grammar and the strict word-accuracy metric.

Every caption has the shape::

    The upper layer shows <modifiers> <style>. The epidermis <...>. The dermis <...>.

The grammar is closed: :func:`all_valid_captions` enumerates the full
language, which downstream tokenizer training relies on.
"""

from __future__ import annotations

import itertools

from .morphology import (
    DERMIS_STATES,
    DYSPLASIA_GRADES,
    KERATIN_STYLES,
    MorphologyParams,
)

STYLE_PHRASES = {
    "basket_weave": "basket weave keratosis",
    "basket_weave_parakeratosis": "basket weave keratosis with parakeratosis",
    "parakeratosis": "parakeratosis",
    "keratosis": "keratosis",
    "eroded": "eroded",
}

GRADE_PHRASES = {
    "mild": "mild",
    "moderate": "moderate",
    "severe": "severe",
    "full_thickness": "full-thickness",
}

DERMIS_SENTENCES = {
    "normal": "The dermis appears normal.",
    "abnormal": "The dermis appears abnormal.",
    "solar_damaged": "The dermis appears solar damaged.",
    "inflammation": "The dermis shows inflammation.",
    "displaced": "The dermis has been displaced.",
}


def _modifier_phrase(modifiers: list[str]) -> str:
    # "and" joins only the final modifier when two or more are present.
    if not modifiers:
        return ""
    if len(modifiers) == 1:
        return modifiers[0]
    return " ".join(modifiers[:-1]) + " and " + modifiers[-1]


def render_caption(params: MorphologyParams) -> str:
    """Deterministic template fill from morphology parameters."""
    mods = _modifier_phrase(params.sorted_modifiers())
    head = "The upper layer shows"
    if mods:
        head = f"{head} {mods}"
    first = f"{head} {STYLE_PHRASES[params.keratin_style]}."

    if params.dysplasia_grade == "normal":
        second = "The epidermis appears normal."
    else:
        second = f"The epidermis shows {GRADE_PHRASES[params.dysplasia_grade]} dysplasia."

    third = DERMIS_SENTENCES[params.dermis_state]
    return f"{first} {second} {third}"


def modifier_combinations() -> list[frozenset[str]]:
    """All legal modifier subsets (thin/thick mutually exclusive)."""
    combos = []
    for tt in (None, "thin", "thick"):
        for extra in itertools.chain.from_iterable(
            itertools.combinations(("fragmented", "detached"), r) for r in range(3)
        ):
            mods = set(extra)
            if tt:
                mods.add(tt)
            combos.append(frozenset(mods))
    return combos


def all_valid_captions() -> list[str]:
    """Every caption the grammar can produce (1,500 distinct strings)."""
    captions = []
    for style in KERATIN_STYLES:
        for mods in modifier_combinations():
            for grade in DYSPLASIA_GRADES:
                for dermis in DERMIS_STATES:
                    # Thickness value itself does not affect the caption;
                    # pick any value consistent with the modifier.
                    thickness = 4 if "thin" in mods else (12 if "thick" in mods else 7)
                    params = MorphologyParams(
                        keratin_thickness=thickness,
                        keratin_style=style,
                        keratin_modifiers=mods,
                        dysplasia_grade=grade,
                        dermis_state=dermis,
                    )
                    captions.append(render_caption(params))
    return sorted(set(captions))


def split_words(caption: str) -> list[str]:
    """Whitespace split; periods stay attached to the preceding word."""
    return caption.split()


def caption_accuracy(predicted: str, truth: str) -> float:
    """Strict positional word accuracy in [0, 1].

    Words at each index are compared for exact equality; the denominator is
    the longer word count, so insertions and omissions are both penalised.
    Two empty captions score 1.0.
    """
    p = split_words(predicted)
    t = split_words(truth)
    longest = max(len(p), len(t))
    if longest == 0:
        return 1.0
    matches = sum(1 for a, b in zip(p, t) if a == b)
    return matches / longest
