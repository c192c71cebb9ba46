"""Polarimetric measurement model.

Eighteen intensities are recorded per quasi-momentum: three input states
(L, H, D) each projected on the three orthogonal pairs (L, R), (H, V), (D, A).
Each projection is normalized by the sum with its orthogonal partner, which
makes the record independent of beam power, of the Gaussian envelope and of
any complex rescaling of the step operator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DarkInput, GeometryError
from .spectral import ModelParams, TWO_PI, q_grid, step_operators, wrap_q

_S2 = np.sqrt(2.0)

STATES = {
    "L": np.array([1, 0], dtype=complex),
    "R": np.array([0, 1], dtype=complex),
    "H": np.array([1, 1], dtype=complex) / _S2,
    "V": np.array([1, -1], dtype=complex) / (_S2 * 1j),
    "D": np.array([1, 1j], dtype=complex) / _S2,
    "A": np.array([1, -1j], dtype=complex) / _S2,
}
INPUTS = ("L", "H", "D")
PROJECTION_PAIRS = (("L", "R"), ("H", "V"), ("D", "A"))
PROJECTIONS = tuple(j for pair in PROJECTION_PAIRS for j in pair)
RATIO_KEYS = tuple(i + j for i in INPUTS for j in PROJECTIONS)
N_RATIOS = len(RATIO_KEYS)

# (2, 3) and (6, 2) matrices used for vectorized amplitudes <j|U|i>
_IN = np.stack([STATES[i] for i in INPUTS], axis=1)
_PROJ = np.stack([STATES[j] for j in PROJECTIONS]).conj()


@dataclass(frozen=True)
class PolarizationState:
    label: str
    ket: np.ndarray

    @classmethod
    def of(cls, label):
        return cls(label, STATES[label])


def _ket(state):
    if isinstance(state, PolarizationState):
        return state.ket
    if isinstance(state, str):
        return STATES[state]
    return np.asarray(state, dtype=complex)


def intensity(u, i, j, i0=1.0):
    """Transmitted intensity i0 |<j|u|i>|^2, not renormalized."""
    amp = np.vdot(_ket(j), np.asarray(u, dtype=complex) @ _ket(i))
    return float(i0 * abs(amp) ** 2)


def raw_intensities(u, i0=1.0):
    """All 18 intensities in :data:`RATIO_KEYS` order; ``u`` may be a stack."""
    u = np.asarray(u, dtype=complex)
    amp = np.einsum("jk,...kl,li->...ij", _PROJ, u, _IN)
    return i0 * (np.abs(amp) ** 2).reshape(u.shape[:-2] + (N_RATIOS,))


def ratios_from_intensities(intens, strict=True):
    """Normalize each projection by its orthogonal pair.

    With ``strict`` a vanishing pair raises :class:`DarkInput`; otherwise the
    affected entries become nan.
    """
    intens = np.asarray(intens, dtype=float)
    pairs = intens.reshape(intens.shape[:-1] + (9, 2))
    tot = pairs.sum(axis=-1, keepdims=True)
    floor = 1e-15 * np.max(intens, axis=-1, initial=0.0)[..., None, None]
    dark = (tot <= floor) | (tot <= 0)
    if strict and np.any(dark):
        raise DarkInput("an input state is fully extinguished for some projection pair")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dark, np.nan, pairs / tot)
    return r.reshape(intens.shape)


def normalized_set(u):
    """The 18 pair-normalized ratios of step operator ``u`` (stack-aware)."""
    return ratios_from_intensities(raw_intensities(u))


@dataclass
class NoiseConfig:
    """Relative Gaussian noise on intensities, optional Poisson photon counting."""

    gaussian_sigma: float = 0.0
    photon_budget: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be >= 0")
        if self.photon_budget is not None and self.photon_budget <= 0:
            raise ValueError("photon_budget must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def noiseless(self):
        return self.gaussian_sigma == 0 and self.photon_budget is None

    def channel_rngs(self, n=N_RATIOS):
        # one independent stream per channel, so channel order never matters
        return [np.random.default_rng(s) for s in np.random.SeedSequence(int(self.seed)).spawn(n)]


def apply_noise(values, rng, noise: NoiseConfig, reference=1.0):
    """Multiplicative Gaussian then Poisson counting; ``reference`` maps to the budget."""
    values = np.asarray(values, dtype=float)
    if noise.gaussian_sigma > 0:
        values = values * (1.0 + noise.gaussian_sigma * rng.standard_normal(values.shape))
        values = np.clip(values, 0.0, None)
    if noise.photon_budget is not None:
        values = rng.poisson(noise.photon_budget * values / reference).astype(float)
    return values


@dataclass
class PolarimetrySet:
    """Ratios on a quasi-momentum grid: ``ratios[k]`` follows :data:`RATIO_KEYS`."""

    q: np.ndarray
    ratios: np.ndarray
    dark: np.ndarray = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.ratios = np.asarray(self.ratios, dtype=float).reshape(len(self.q), N_RATIOS)
        if self.dark is None:
            self.dark = np.any(~np.isfinite(self.ratios), axis=1)
        self.dark = np.asarray(self.dark, dtype=bool)

    def __len__(self):
        return len(self.q)

    def ratio(self, key):
        return self.ratios[:, RATIO_KEYS.index(key)]

    def to_records(self):
        recs = []
        for k, (q, row) in enumerate(zip(self.q, self.ratios)):
            vals = {key: (None if not np.isfinite(v) else float(v)) for key, v in zip(RATIO_KEYS, row)}
            recs.append({"k": k, "q": float(q), "ratios": vals})
        return recs

    @classmethod
    def from_records(cls, records):
        recs = sorted(records, key=lambda r: r["k"])
        q = [r["q"] for r in recs]
        rows = [[np.nan if r["ratios"][key] is None else r["ratios"][key] for key in RATIO_KEYS] for r in recs]
        return cls(np.array(q), np.array(rows, dtype=float))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_records(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_records(json.loads(Path(path).read_text()))


def synthesize_dataset(p: ModelParams, n_q=90, noise: NoiseConfig | None = None, i0=1.0) -> PolarimetrySet:
    """Simulated tomography record over a uniform grid of ``n_q`` momenta."""
    if n_q < 2:
        raise ValueError("need at least two quasi-momentum samples")
    noise = noise or NoiseConfig()
    q = q_grid(n_q)
    intens = raw_intensities(step_operators(p, q), i0)
    if not noise.noiseless:
        rngs = noise.channel_rngs()
        intens = np.stack([apply_noise(intens[:, c], rngs[c], noise, i0) for c in range(N_RATIOS)], axis=1)
    return PolarimetrySet(q, ratios_from_intensities(intens, strict=True))


# ---------------------------------------------------------------------------
# camera images


@dataclass
class ImageGeometry:
    """Camera frame layout.

    ``bz_width_px`` pixels span one Brillouin zone along x; ``waist_px`` is the
    Gaussian beam waist (defaults to one zone width).  ``q_sampling`` is
    ``"pixel"`` (each column at its own q) or ``"cluster"`` (all columns of a
    compressed block share the block-centre q).
    """

    width: int = 1080
    height: int = 1080
    bz_width_px: int = 1080
    waist_px: float | None = None
    q_sampling: str = "pixel"
    n_columns: int = 90

    def __post_init__(self):
        if self.waist_px is None:
            self.waist_px = float(self.bz_width_px)
        if self.q_sampling not in ("pixel", "cluster"):
            raise GeometryError(f"unknown q_sampling {self.q_sampling!r}")

    def validate(self):
        if not (self.width >= self.bz_width_px >= self.n_columns):
            raise GeometryError("need width >= bz_width_px >= n_columns")
        if self.height < self.n_columns:
            raise GeometryError("image height smaller than the compressed grid")
        if self.waist_px < self.bz_width_px:
            raise GeometryError("beam waist must cover one Brillouin zone (w0 >= Lambda)")

    def column_q(self):
        """Quasi-momentum at the centre of each compressed column."""
        centre = (np.arange(self.n_columns) + 0.5) * self.width / self.n_columns - 0.5
        return wrap_q(TWO_PI * centre / self.bz_width_px)

    def pixel_q(self):
        if self.q_sampling == "cluster":
            block = np.minimum((np.arange(self.width) * self.n_columns) // self.width, self.n_columns - 1)
            return self.column_q()[block]
        return wrap_q(TWO_PI * np.arange(self.width) / self.bz_width_px)

    def envelope(self):
        """|A(x, y)|^2 of a centred Gaussian beam."""
        x = np.arange(self.width) - (self.width - 1) / 2.0
        y = np.arange(self.height) - (self.height - 1) / 2.0
        r2 = y[:, None] ** 2 + x[None, :] ** 2
        return np.exp(-2.0 * r2 / self.waist_px**2)


@dataclass
class IntensityImage:
    label: str
    values: np.ndarray
    bz_width_px: int
    meta: dict = field(default_factory=dict)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


def render_images(p: ModelParams, geometry: ImageGeometry | None = None, noise: NoiseConfig | None = None, i0=1.0):
    """Synthetic camera frames for all 18 (input, projection) settings."""
    geometry = geometry or ImageGeometry()
    geometry.validate()
    noise = noise or NoiseConfig()
    env = geometry.envelope()
    col = raw_intensities(step_operators(p, geometry.pixel_q()), i0)  # (width, 18)
    rngs = None if noise.noiseless else noise.channel_rngs()
    images = {}
    for c, key in enumerate(RATIO_KEYS):
        img = env * col[None, :, c]
        if rngs is not None:
            img = apply_noise(img, rngs[c], noise, i0)
        images[key] = IntensityImage(key, img, geometry.bz_width_px)
    return images


def _bin_matrix(n_in, n_out):
    # area-weighted averaging operator, exact for non-divisible sizes
    edges = np.arange(n_out + 1) * n_in / n_out
    lo, hi = edges[:-1, None], edges[1:, None]
    x = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, x + 1) - np.maximum(lo, x), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def compress(values, n_out=90):
    """Block-average an image down to ``n_out x n_out``."""
    values = np.asarray(values, dtype=float)
    by = _bin_matrix(values.shape[0], n_out)
    bx = _bin_matrix(values.shape[1], n_out)
    return by @ values @ bx.T


def ingest_images(images, n_columns=90, strict=False) -> PolarimetrySet:
    """Compress, integrate along y, and pair-normalize 18 frames.

    Columns where a projection pair is dark are marked in ``dark`` (nan
    ratios) unless ``strict``, in which case :class:`DarkInput` is raised.
    """
    missing = [k for k in RATIO_KEYS if k not in images]
    if missing:
        raise GeometryError(f"missing images {missing}")
    first = images[RATIO_KEYS[0]]
    for k in RATIO_KEYS:
        im = images[k]
        if im.values.shape != first.values.shape or im.bz_width_px != first.bz_width_px:
            raise GeometryError("all 18 images must share one geometry")
    geom = ImageGeometry(first.width, first.height, first.bz_width_px, n_columns=n_columns)
    if not (geom.width >= geom.n_columns and geom.height >= geom.n_columns):
        raise GeometryError("images smaller than the compressed grid")
    cols = np.stack([compress(images[k].values, n_columns).sum(axis=0) for k in RATIO_KEYS], axis=1)
    return PolarimetrySet(geom.column_q(), ratios_from_intensities(cols, strict=strict))


def write_images(images, directory, extra_meta=None):
    """Write ``<label>.pgm`` (16-bit) files and a ``meta.json`` sidecar.

    One common scale factor maps all frames to 16 bits so relative intensities
    between frames survive.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    peak = max(float(np.max(im.values)) for im in images.values())
    scale = 65535.0 / peak if peak > 0 else 1.0
    first = next(iter(images.values()))
    for key, im in images.items():
        data = np.clip(np.rint(im.values * scale), 0, 65535).astype(">u2")
        header = f"P5\n{im.width} {im.height}\n65535\n".encode("ascii")
        (directory / f"{key}.pgm").write_bytes(header + data.tobytes())
    meta = {
        "width": first.width,
        "height": first.height,
        "bz_width_px": first.bz_width_px,
        "scale": scale,
        "labels": list(images),
    }
    meta.update(extra_meta or {})
    (directory / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return directory


def _read_pgm(path):
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    pos += 1
    if tokens[0] != b"P5":
        raise GeometryError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(float)


def read_images(directory):
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    images = {}
    for key in meta["labels"]:
        values = _read_pgm(directory / f"{key}.pgm") / meta["scale"]
        images[key] = IntensityImage(key, values, meta["bz_width_px"], meta)
    return images
