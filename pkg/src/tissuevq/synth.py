"""Synthetic tri-band tissue-analog image generator and its pixel oracle.

Images are square RGB arrays in [-1, 1] with three horizontal bands:
a bright keratin band at the top (style-specific texture, exact thickness
from the morphology parameters), a mid-tone epidermis of cell-like blobs
whose size variance and nucleus saturation ramp with dysplasia grade, and
a dermis band rendered per state. The keratin band is the only region
whose per-row mean luminance clears :data:`KERATIN_LUMINANCE_THRESHOLD`,
which is what :func:`measure_bands` counts.

The generator doubles as ground truth: captions rendered from the same
parameters are correct descriptions of the pixels by construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from PIL import Image

from .captions import render_caption
from .morphology import (
    DERMIS_STATES,
    DYSPLASIA_GRADES,
    KERATIN_STYLES,
    MorphologyParams,
    derive_thickness_modifier,
    thick_threshold,
    thin_threshold,
)

# Mean row luminance (in [-1, 1]) above which a row counts as keratin.
KERATIN_LUMINANCE_THRESHOLD = 0.35
# Fraction of the image height where the dermis band begins.
DERMIS_START_FRAC = 0.72

SPLITS = ("train", "val", "test")
SPLIT_FRACTIONS = (0.64, 0.18, 0.18)

MANIFEST_VERSION = 1

_BACKGROUND = np.array([0.08, 0.07, 0.10], np.float32)
_KERATIN_LIGHT = np.array([0.97, 0.88, 0.92], np.float32)
_KERATIN_PINK = np.array([0.90, 0.72, 0.80], np.float32)
_EPIDERMIS_BASE = np.array([0.62, 0.45, 0.66], np.float32)
_CYTOPLASM = np.array([0.68, 0.52, 0.72], np.float32)
_NUCLEUS_MILD = np.array([0.45, 0.33, 0.58], np.float32)
_NUCLEUS_SEVERE = np.array([0.22, 0.06, 0.42], np.float32)
_DERMIS_PALE = np.array([0.88, 0.72, 0.78], np.float32)
_DERMIS_DARK = np.array([0.58, 0.42, 0.48], np.float32)
_ELASTOSIS = np.array([0.52, 0.56, 0.72], np.float32)
_LYMPHOCYTE = np.array([0.18, 0.16, 0.45], np.float32)


class DatasetError(RuntimeError):
    """Raised for dataset build/load failures."""


@dataclass(frozen=True)
class BandMetrics:
    """Row-statistic measurements; invariant under left-right flips."""

    top_band_thickness: int
    mid_band_irregularity: float
    bottom_speckle_density: float


@dataclass(frozen=True)
class SampleRecord:
    id: str
    image_path: str
    caption: str
    params: MorphologyParams
    split: str
    flipped: bool


@dataclass
class DatasetManifest:
    version: int
    image_size: int
    records: list[SampleRecord]
    vocabulary_path: str
    root: Path = field(default_factory=Path)

    def by_split(self, split: str) -> list[SampleRecord]:
        return [r for r in self.records if r.split == split]


# ---------------------------------------------------------------------------
# rendering


def _blotches(rng: np.random.Generator, h: int, w: int, cell: int, amp: float):
    gh, gw = -(-h // cell), -(-w // cell)
    grid = rng.uniform(-1.0, 1.0, (gh, gw))
    return np.kron(grid, np.ones((cell, cell)))[:h, :w] * amp


def _scatter_dots(
    rng: np.random.Generator, region: np.ndarray, density: float,
    color: np.ndarray, radius: int,
) -> None:
    h, w = region.shape[:2]
    mask = rng.random((h, w)) < density
    if radius > 1:
        grown = mask.copy()
        for dy in range(-(radius - 1), radius):
            for dx in range(-(radius - 1), radius):
                grown |= np.roll(np.roll(mask, dy, axis=0), dx, axis=1)
        mask = grown
    region[mask] = color


def _render_keratin(img: np.ndarray, params: MorphologyParams,
                    rng: np.random.Generator) -> None:
    size = img.shape[0]
    kt = params.keratin_thickness
    band = img[:kt]
    h, w = band.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]

    style = params.keratin_style
    if style in ("basket_weave", "basket_weave_parakeratosis"):
        lam_x = max(6.0, size / 8.0)
        phase = rng.uniform(0, 2 * np.pi)
        weave = 0.5 + 0.5 * np.sin(
            2 * np.pi * xx / lam_x + phase + 1.6 * np.sin(2 * np.pi * yy / 3.0)
        )
        band[:] = _KERATIN_PINK + weave[..., None] * (_KERATIN_LIGHT - _KERATIN_PINK)
    elif style == "eroded":
        band[:] = 0.5 * (_KERATIN_LIGHT + _KERATIN_PINK) + 0.03
    else:  # keratosis, parakeratosis: compact texture
        band[:] = _KERATIN_PINK + 0.5 * (_KERATIN_LIGHT - _KERATIN_PINK)
    band += rng.uniform(-0.02, 0.02, band.shape).astype(np.float32)

    if style in ("parakeratosis", "basket_weave_parakeratosis"):
        # Retained nuclei: sparse small dark dots; density kept low so row
        # means stay above the keratin luminance threshold.
        _scatter_dots(rng, band, 0.06, np.array([0.42, 0.30, 0.50], np.float32), 1)
    if style == "eroded":
        _scatter_dots(rng, band, 0.05, _BACKGROUND, 1)

    if "fragmented" in params.keratin_modifiers:
        n_cracks = 2 + int(rng.integers(0, 2))
        for _ in range(n_cracks):
            x0 = int(rng.integers(2, w - 2))
            jitter = rng.integers(-1, 2, h)
            cols = np.clip(x0 + np.cumsum(jitter) // 2, 0, w - 1)
            band[np.arange(h), cols] = _BACKGROUND


def _render_epidermis(img: np.ndarray, params: MorphologyParams,
                      rng: np.random.Generator, top: int, bottom: int) -> None:
    size = img.shape[0]
    if bottom <= top:
        return
    region = img[top:bottom]
    region[:] = _EPIDERMIS_BASE
    region += rng.uniform(-0.02, 0.02, region.shape).astype(np.float32)

    grade = DYSPLASIA_GRADES.index(params.dysplasia_grade)
    affected_frac = (0.0, 0.35, 0.55, 0.8, 1.0)[grade]
    h = bottom - top
    affected_top = bottom - int(round(affected_frac * h))

    spacing = max(4, size // 14)
    base_radius = max(1.8, size / 26.0)
    sigma = 0.05 + 0.11 * grade
    nucleus_color = _NUCLEUS_MILD + (grade / 4.0) * (_NUCLEUS_SEVERE - _NUCLEUS_MILD)
    nucleus_frac = 0.35 + 0.05 * grade

    yy, xx = np.mgrid[0:size, 0:size]
    for cy in range(top + spacing // 2, bottom, spacing):
        for cx in range(spacing // 2, size, spacing):
            jy = cy + int(rng.integers(-1, 2))
            jx = cx + int(rng.integers(-1, 2))
            in_affected = jy >= affected_top
            r = base_radius
            if in_affected:
                r = base_radius * float(np.clip(1 + sigma * rng.normal(), 0.5, 2.4))
            r = min(r, spacing * 0.7)
            y0, y1 = max(top, jy - int(r) - 1), min(bottom, jy + int(r) + 2)
            x0, x1 = max(0, jx - int(r) - 1), min(size, jx + int(r) + 2)
            if y1 <= y0 or x1 <= x0:
                continue
            d2 = (yy[y0:y1, x0:x1] - jy) ** 2 + (xx[y0:y1, x0:x1] - jx) ** 2
            body = d2 <= r * r
            img[y0:y1, x0:x1][body] = _CYTOPLASM
            nr = max(0.9, r * nucleus_frac)
            core = d2 <= nr * nr
            color = nucleus_color if in_affected else _NUCLEUS_MILD
            img[y0:y1, x0:x1][core] = color


def _render_dermis(img: np.ndarray, params: MorphologyParams,
                   rng: np.random.Generator, top: int) -> None:
    size = img.shape[0]
    region = img[top:]
    h, w = region.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    state = params.dermis_state

    fibers = 0.04 * np.sin(2 * np.pi * yy / 4.0 + 2.0 * np.sin(2 * np.pi * xx / size)
                           + rng.uniform(0, 2 * np.pi))
    if state == "normal":
        region[:] = _DERMIS_PALE + fibers[..., None]
    elif state == "abnormal":
        region[:] = _DERMIS_DARK + fibers[..., None]
        region += _blotches(rng, h, w, max(3, size // 16), 0.10)[..., None]
    elif state == "solar_damaged":
        lam = max(4.0, size / 10.0)
        waves = 0.5 + 0.5 * np.sin(2 * np.pi * yy / lam
                                   + 1.3 * np.sin(2 * np.pi * xx / (2 * lam))
                                   + rng.uniform(0, 2 * np.pi))
        weight = np.clip(waves * 1.4 - 0.2, 0, 1)[..., None]
        region[:] = _DERMIS_PALE + weight * (_ELASTOSIS - _DERMIS_PALE) + fibers[..., None]
    elif state == "inflammation":
        region[:] = _DERMIS_PALE + fibers[..., None]
        _scatter_dots(rng, region, 0.10, _LYMPHOCYTE, 1)
    elif state == "displaced":
        region[:] = _DERMIS_PALE + fibers[..., None]
        split_x = int(rng.integers(w // 3, 2 * w // 3))
        offset = max(2, size // 16)
        shifted = np.roll(region[:, split_x:], offset, axis=0)
        shifted[:offset] = _BACKGROUND
        region[:, split_x:] = shifted
        region[:, split_x:split_x + 1] = _BACKGROUND
    region += rng.uniform(-0.015, 0.015, region.shape).astype(np.float32)


def _shift_hue(img01: np.ndarray, delta: float) -> np.ndarray:
    hsv = rgb_to_hsv(np.clip(img01, 0.0, 1.0))
    hsv[..., 0] = (hsv[..., 0] + delta) % 1.0
    return hsv_to_rgb(hsv)


def generate_sample(params: MorphologyParams, size: int) -> tuple[np.ndarray, str]:
    """Render one image and its caption, deterministically from (params, size)."""
    if size < 32 or size & (size - 1):
        raise ValueError(f"size must be a power of two >= 32, got {size}")
    params.validate(size)
    rng = np.random.default_rng(params.seed)

    img = np.empty((size, size, 3), np.float32)
    img[:] = _BACKGROUND
    kt = params.keratin_thickness

    _render_keratin(img, params, rng)

    epi_top = kt
    if "detached" in params.keratin_modifiers:
        # Separation gap below the keratin band; stays dark so it never
        # extends the measured top-band run.
        gap = max(2, size // 24) + int(rng.integers(0, max(1, size // 32)))
        epi_top = kt + gap

    dermis_top = int(round(DERMIS_START_FRAC * size))
    _render_epidermis(img, params, rng, epi_top, dermis_top)
    _render_dermis(img, params, rng, dermis_top)

    img = _shift_hue(img, (params.stain_hue - 0.5) * 0.12)
    img = np.clip(img, 0.0, 1.0).astype(np.float32) * 2.0 - 1.0
    return img, render_caption(params)


def flip_image(image: np.ndarray) -> np.ndarray:
    """Left-right mirror."""
    return np.ascontiguousarray(image[:, ::-1, :])


def measure_bands(image: np.ndarray) -> BandMetrics:
    """Row-statistics oracle over a rendered or reconstructed image."""
    lum = image.mean(axis=2)
    row_lum = lum.mean(axis=1)
    thickness = 0
    for value in row_lum:
        if value > KERATIN_LUMINANCE_THRESHOLD:
            thickness += 1
        else:
            break
    h = image.shape[0]
    dermis_top = int(round(DERMIS_START_FRAC * h))
    mid = lum[min(thickness, h):dermis_top]
    irregularity = float(mid.std()) if mid.size else 0.0
    bottom = lum[dermis_top:]
    speckle = float((bottom < -0.35).mean()) if bottom.size else 0.0
    return BandMetrics(thickness, irregularity, speckle)


# ---------------------------------------------------------------------------
# dataset build / persistence


def save_image_png(image: np.ndarray, path: Path | str) -> None:
    """Write an RGB image in [-1, 1] as 8-bit PNG."""
    u8 = np.clip(np.round((image + 1.0) * 127.5), 0, 255).astype(np.uint8)
    Image.fromarray(u8, "RGB").save(path, format="PNG")


def load_image_png(path: Path | str) -> np.ndarray:
    """Read an 8-bit PNG back to float RGB in [-1, 1]."""
    with Image.open(path) as im:
        u8 = np.asarray(im.convert("RGB"), np.uint8)
    return (u8.astype(np.float32) / 127.5) - 1.0


def sample_params(rng: np.random.Generator, size: int) -> MorphologyParams:
    """Draw one random, self-consistent parameter set."""
    thin_hi = thin_threshold(size)
    thick_lo = thick_threshold(size)
    thick_hi = min(size // 4, thick_lo + max(2, size // 16))
    bucket = rng.choice(3, p=(0.34, 0.30, 0.36))
    if bucket == 0:
        thickness = int(rng.integers(2, thin_hi + 1))
    elif bucket == 1:
        thickness = int(rng.integers(thin_hi + 1, thick_lo))
    else:
        thickness = int(rng.integers(thick_lo, thick_hi + 1))

    modifiers = set()
    tt = derive_thickness_modifier(thickness, size)
    if tt:
        modifiers.add(tt)
    if rng.random() < 0.25:
        modifiers.add("fragmented")
    if rng.random() < 0.20:
        modifiers.add("detached")

    return MorphologyParams(
        keratin_thickness=thickness,
        keratin_style=KERATIN_STYLES[int(rng.integers(len(KERATIN_STYLES)))],
        keratin_modifiers=frozenset(modifiers),
        dysplasia_grade=DYSPLASIA_GRADES[int(rng.integers(len(DYSPLASIA_GRADES)))],
        dermis_state=DERMIS_STATES[int(rng.integers(len(DERMIS_STATES)))],
        stain_hue=float(rng.uniform(0.0, 1.0)),
        seed=int(rng.integers(0, 2**63 - 1)),
    )


def split_counts(n_unique: int) -> tuple[int, int, int]:
    n_train = round(SPLIT_FRACTIONS[0] * n_unique)
    n_val = round(SPLIT_FRACTIONS[1] * n_unique)
    return n_train, n_val, n_unique - n_train - n_val


def build_dataset(n_unique: int, size: int, seed: int, out_dir: Path | str) -> DatasetManifest:
    """Render ``2 * n_unique`` images (sample + left-right flip) and a manifest.

    A sample and its flip share the caption and the split; splits are
    64:18:18 over unique samples. Deterministic for a fixed seed.
    """
    if n_unique < 100:
        raise DatasetError(f"n_unique must be >= 100, got {n_unique}")
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create dataset directory {out_dir}: {exc}") from exc

    rng = np.random.default_rng(seed)
    params_list = [sample_params(rng, size) for _ in range(n_unique)]
    _check_coverage(params_list)

    n_train, n_val, _ = split_counts(n_unique)
    order = rng.permutation(n_unique)
    split_of = {}
    for rank, idx in enumerate(order):
        split_of[int(idx)] = (
            "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
        )

    width = max(4, len(str(n_unique - 1)))
    records: list[SampleRecord] = []
    for i, params in enumerate(params_list):
        sid = f"s{i:0{width}d}"
        image, caption = generate_sample(params, size)
        rel = f"images/{sid}.png"
        save_image_png(image, out_dir / rel)
        rel_flip = f"images/{sid}f.png"
        save_image_png(flip_image(image), out_dir / rel_flip)
        split = split_of[i]
        records.append(SampleRecord(sid, rel, caption, params, split, False))
        records.append(SampleRecord(sid + "f", rel_flip, caption, params, split, True))

    manifest = DatasetManifest(
        version=MANIFEST_VERSION,
        image_size=size,
        records=records,
        vocabulary_path="vocab.txt",
        root=out_dir,
    )
    save_manifest(manifest, out_dir / "manifest.txt")
    return manifest


def _check_coverage(params_list: list[MorphologyParams]) -> None:
    seen_styles = {p.keratin_style for p in params_list}
    seen_grades = {p.dysplasia_grade for p in params_list}
    seen_dermis = {p.dermis_state for p in params_list}
    seen_mods = set().union(*(p.keratin_modifiers for p in params_list))
    missing = (
        (set(KERATIN_STYLES) - seen_styles)
        | (set(DYSPLASIA_GRADES) - seen_grades)
        | (set(DERMIS_STATES) - seen_dermis)
        | ({"thin", "thick", "fragmented", "detached"} - seen_mods)
    )
    if missing:
        raise DatasetError(
            f"dataset too small to cover all enum values; missing {sorted(missing)}"
        )


def _record_line(record: SampleRecord) -> str:
    p = record.params
    fields = [
        ("id", record.id),
        ("image_path", record.image_path),
        ("split", record.split),
        ("flipped", "true" if record.flipped else "false"),
        ("caption", record.caption),
        ("keratin_thickness", str(p.keratin_thickness)),
        ("keratin_style", p.keratin_style),
        ("keratin_modifiers", ",".join(p.sorted_modifiers())),
        ("dysplasia_grade", p.dysplasia_grade),
        ("dermis_state", p.dermis_state),
        ("stain_hue", repr(p.stain_hue)),
        ("seed", str(p.seed)),
    ]
    return "\t".join(f"{k}={v}" for k, v in fields)


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    path = Path(path)
    lines = [
        f"version={manifest.version}\timage_size={manifest.image_size}"
        f"\tvocabulary_path={manifest.vocabulary_path}"
    ]
    lines.extend(_record_line(r) for r in manifest.records)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_kv_line(line: str) -> dict[str, str]:
    out = {}
    for part in line.rstrip("\n").split("\t"):
        key, _, value = part.partition("=")
        out[key] = value
    return out


def load_manifest(path: Path | str) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetError(f"manifest is empty: {path}")
    header = _parse_kv_line(lines[0])
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        kv = _parse_kv_line(line)
        mods = frozenset(m for m in kv["keratin_modifiers"].split(",") if m)
        params = MorphologyParams(
            keratin_thickness=int(kv["keratin_thickness"]),
            keratin_style=kv["keratin_style"],
            keratin_modifiers=mods,
            dysplasia_grade=kv["dysplasia_grade"],
            dermis_state=kv["dermis_state"],
            stain_hue=float(kv["stain_hue"]),
            seed=int(kv["seed"]),
        )
        records.append(
            SampleRecord(
                id=kv["id"],
                image_path=kv["image_path"],
                caption=kv["caption"],
                params=params,
                split=kv["split"],
                flipped=kv["flipped"] == "true",
            )
        )
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"duplicate record ids in {path}")
    return DatasetManifest(
        version=int(header["version"]),
        image_size=int(header["image_size"]),
        records=records,
        vocabulary_path=header.get("vocabulary_path", ""),
        root=path.parent,
    )


def load_split(manifest: DatasetManifest, split: str) -> list[SampleRecord]:
    """Records of one split in stable id order; image files must exist."""
    if split not in SPLITS:
        raise DatasetError(f"unknown split {split!r}")
    records = sorted(manifest.by_split(split), key=lambda r: r.id)
    for record in records:
        full = manifest.root / record.image_path
        if not full.exists():
            raise DatasetError(f"missing image file: {full}")
    return records


def load_split_images(manifest: DatasetManifest, split: str) -> tuple[list[SampleRecord], np.ndarray]:
    """Load a split's records plus a stacked (N, H, W, 3) image array."""
    records = load_split(manifest, split)
    images = np.stack([load_image_png(manifest.root / r.image_path) for r in records])
    return records, images
