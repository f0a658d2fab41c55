"""Synthetic face corpus: generation, morphing, preprocessing, splits, disk layout.

Faces are parametric (oval face region, two eye blobs, a mouth bar) over a
noisy background; every parameter comes from the seeded LCG so a corpus is a
pure function of its seed. Morphs are pixelwise blends of two distinct bona
fide faces, which leaves the classic blend artifacts: ghosted part edges and
flattened local contrast (averaging two independent noise fields shrinks its
amplitude by up to 1/sqrt(2)).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .resample import bilinear_resize
from .rng import Lcg, derive_seed, noise_grid
from .viz import RgbImage, decode_ppm, encode_ppm

_FACE_STREAM = 0xFACE
_NOISE_STREAM = 0x701E
_PAIR_STREAM = 0x9A13
_SPLIT_STREAM = 0x5B17

# Uniform per-pixel noise amplitude, in 8-bit intensity units. Kept high so
# blending two faces measurably flattens local contrast, and sized so the
# darkest face tone minus the amplitude still stays above zero (no clipping,
# which would skew the noise statistics the classifier keys on).
NOISE_AMPLITUDE = 75.0

LAMBDA_MIN = 0.25
LAMBDA_MAX = 0.75


@dataclass(frozen=True)
class Provenance:
    """Where a sample came from: generated directly, or blended from two ids."""

    kind: str  # "generated" | "blend"
    source_a: str | None = None
    source_b: str | None = None
    lam: float | None = None


@dataclass(frozen=True, eq=False)
class LabeledImage:
    uid: str
    image: RgbImage
    label: int  # 0 = bona fide, 1 = morphed
    provenance: Provenance

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")
        if self.label == 0 and self.provenance.kind != "generated":
            raise DataError("bona fide samples must carry generated provenance")
        if self.label == 1:
            p = self.provenance
            if p.kind != "blend" or p.source_a is None or p.source_b is None or p.lam is None:
                raise DataError("morphed samples must carry blend provenance")
            if not LAMBDA_MIN <= p.lam <= LAMBDA_MAX:
                raise DataError(f"blend weight {p.lam} outside [{LAMBDA_MIN}, {LAMBDA_MAX}]")


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: list[LabeledImage]
    test: list[LabeledImage]
    ratio: float
    seed: int


def generate_face(seed: int, index: int, resolution: int = 64) -> LabeledImage:
    """Deterministic synthetic face: all geometry and tones are LCG draws."""
    if resolution < 8:
        raise DataError(f"face resolution must be >= 8, got {resolution}")
    rng = Lcg(derive_seed(seed, _FACE_STREAM, index))
    res = resolution
    yy, xx = np.mgrid[0:res, 0:res].astype(np.float64)

    canvas = np.empty((res, res, 3), dtype=np.float64)
    background = rng.uniform(85.0, 105.0)
    for channel in range(3):
        canvas[:, :, channel] = background + rng.uniform(-6.0, 6.0)

    skin = np.array([rng.uniform(160.0, 180.0), rng.uniform(135.0, 155.0), rng.uniform(115.0, 135.0)])
    cx = res * rng.uniform(0.47, 0.53)
    cy = res * rng.uniform(0.47, 0.53)
    rx = res * rng.uniform(0.24, 0.28)
    ry = res * rng.uniform(0.33, 0.37)
    face = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    canvas[face] = skin

    eye_y = cy - ry * rng.uniform(0.28, 0.36)
    eye_dx = rx * rng.uniform(0.40, 0.50)
    eye_r = res * rng.uniform(0.035, 0.050)
    eye_tone = rng.uniform(80.0, 100.0)
    for side in (-1.0, 1.0):
        eye = (xx - (cx + side * eye_dx)) ** 2 + (yy - eye_y) ** 2 <= eye_r**2
        canvas[eye] = eye_tone

    mouth_y = cy + ry * rng.uniform(0.40, 0.50)
    mouth_hw = rx * rng.uniform(0.40, 0.55)
    mouth_hh = res * rng.uniform(0.020, 0.035)
    mouth_tone = rng.uniform(90.0, 110.0)
    mouth = (np.abs(xx - cx) <= mouth_hw) & (np.abs(yy - mouth_y) <= mouth_hh)
    canvas[mouth] = mouth_tone

    canvas += noise_grid(derive_seed(seed, _NOISE_STREAM, index), res, res, NOISE_AMPLITUDE)[:, :, None]
    pixels = np.clip(np.floor(canvas + 0.5), 0.0, 255.0).astype(np.uint8)
    return LabeledImage(
        uid=f"bf-{index:04d}",
        image=RgbImage(pixels),
        label=0,
        provenance=Provenance("generated"),
    )


def morph(a: LabeledImage, b: LabeledImage, lam: float, uid: str | None = None) -> LabeledImage:
    """Pixelwise blend round(lam * a + (1 - lam) * b), labeled as an attack."""
    if a.label != 0 or b.label != 0:
        raise DataError("morph parents must both be bona fide")
    if a.image.pixels.shape != b.image.pixels.shape:
        raise DataError(
            f"morph parents differ in size: {a.image.pixels.shape} vs {b.image.pixels.shape}"
        )
    if not LAMBDA_MIN <= lam <= LAMBDA_MAX:
        raise DataError(f"blend weight {lam} outside [{LAMBDA_MIN}, {LAMBDA_MAX}]")
    blended = lam * a.image.pixels.astype(np.float64) + (1.0 - lam) * b.image.pixels.astype(np.float64)
    pixels = np.floor(blended + 0.5).astype(np.uint8)
    return LabeledImage(
        uid=uid if uid is not None else f"mp-{a.uid}x{b.uid}",
        image=RgbImage(pixels),
        label=1,
        provenance=Provenance("blend", a.uid, b.uid, float(lam)),
    )


def build_corpus(
    n_bonafide: int = 128, n_morphed: int = 128, seed: int = 1, resolution: int = 64
) -> list[LabeledImage]:
    """Bona fide faces followed by morphs over distinct unordered pairs."""
    if n_bonafide < 0 or n_morphed < 0:
        raise DataError("corpus sizes must be non-negative")
    max_pairs = n_bonafide * (n_bonafide - 1) // 2
    if n_morphed > max_pairs:
        raise DataError(
            f"{n_morphed} morphs requested but only {max_pairs} distinct pairs exist "
            f"for {n_bonafide} bona fide faces"
        )
    faces = [generate_face(seed, i, resolution) for i in range(n_bonafide)]
    rng = Lcg(derive_seed(seed, _PAIR_STREAM))
    used: set[tuple[int, int]] = set()
    morphs: list[LabeledImage] = []
    while len(morphs) < n_morphed:
        i = rng.randint(n_bonafide)
        j = rng.randint(n_bonafide)
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in used:
            continue
        used.add(key)
        lam = rng.uniform(LAMBDA_MIN, LAMBDA_MAX)
        morphs.append(morph(faces[i], faces[j], lam, uid=f"mp-{len(morphs):04d}"))
    return faces + morphs


def preprocess(image, resolution: int) -> np.ndarray:
    """Scale to [0, 1], bilinear-resize to resolution x resolution, channel-first.

    For an image already at the target size the result is exactly pixel/255.
    """
    if resolution < 8:
        raise DataError(f"target resolution must be >= 8, got {resolution}")
    pixels = image.pixels if isinstance(image, RgbImage) else np.asarray(image)
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[:, :, None], 3, axis=2)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise DataError(f"degenerate source image with shape {np.asarray(pixels).shape}")
    scaled = pixels.astype(np.float64) / 255.0
    resized = bilinear_resize(scaled, resolution, resolution)
    return np.ascontiguousarray(resized.transpose(2, 0, 1))


def split(corpus: list[LabeledImage], ratio: float = 0.8, seed: int = 1) -> DatasetSplit:
    """Seeded stratified partition; each class is cut at round(ratio * n)."""
    if not corpus:
        raise DataError("cannot split an empty corpus")
    if not 0.0 <= ratio <= 1.0:
        raise DataError(f"split ratio must be in [0, 1], got {ratio}")
    rng = Lcg(derive_seed(seed, _SPLIT_STREAM))
    train: list[LabeledImage] = []
    test: list[LabeledImage] = []
    for label in (0, 1):
        members = [s for s in corpus if s.label == label]
        order = list(range(len(members)))
        rng.shuffle(order)
        n_train = int(np.floor(ratio * len(members) + 0.5))
        train.extend(members[i] for i in order[:n_train])
        test.extend(members[i] for i in order[n_train:])
    rng.shuffle(train)
    rng.shuffle(test)
    return DatasetSplit(train, test, ratio, seed)


def save_corpus(directory, corpus: list[LabeledImage]) -> None:
    """Write bonafide/NNNN.ppm, morph/NNNN.ppm, and manifest.tsv.

    Manifest columns: id, label, source_a, source_b, lambda (6 decimals);
    bona fide rows carry "-" in the blend columns. One row per image, no
    header, rows in corpus order.
    """
    root = Path(directory)
    (root / "bonafide").mkdir(parents=True, exist_ok=True)
    (root / "morph").mkdir(parents=True, exist_ok=True)
    counters = {0: 0, 1: 0}
    rows = []
    for sample in corpus:
        sub = "bonafide" if sample.label == 0 else "morph"
        index = counters[sample.label]
        counters[sample.label] += 1
        (root / sub / f"{index:04d}.ppm").write_bytes(encode_ppm(sample.image))
        if sample.label == 1:
            p = sample.provenance
            rows.append(f"{sample.uid}\t1\t{p.source_a}\t{p.source_b}\t{p.lam:.6f}")
        else:
            rows.append(f"{sample.uid}\t0\t-\t-\t-")
    (root / "manifest.tsv").write_text("\n".join(rows) + "\n", encoding="ascii")


def load_corpus(directory) -> list[LabeledImage]:
    root = Path(directory)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise DataError(f"corpus not found: no manifest at {manifest}")
    samples: list[LabeledImage] = []
    counters = {0: 0, 1: 0}
    for line_no, line in enumerate(manifest.read_text(encoding="ascii").splitlines(), 1):
        fields = line.split("\t")
        if len(fields) != 5:
            raise DataError(f"manifest line {line_no} has {len(fields)} fields, expected 5")
        uid, label_text, source_a, source_b, lam_text = fields
        if label_text not in ("0", "1"):
            raise DataError(f"manifest line {line_no} has label {label_text!r}")
        label = int(label_text)
        sub = "bonafide" if label == 0 else "morph"
        path = root / sub / f"{counters[label]:04d}.ppm"
        counters[label] += 1
        if not path.is_file():
            raise DataError(f"corpus image missing: {path}")
        image = decode_ppm(path.read_bytes())
        if label == 1:
            try:
                lam = float(lam_text)
            except ValueError:
                raise DataError(f"manifest line {line_no} has blend weight {lam_text!r}") from None
            provenance = Provenance("blend", source_a, source_b, lam)
        else:
            provenance = Provenance("generated")
        samples.append(LabeledImage(uid, image, label, provenance))
    return samples
