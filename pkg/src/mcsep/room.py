"""Shoebox-room image-source simulation and two-speaker mixture synthesis.

Coordinates are meters in a room spanning ``[0, L]`` on each axis.

DOA convention: with ``a`` the unit vector from the reference microphone
towards the far end of the array and ``u`` the unit vector from the array
centre towards the source, ``cos(doa) = -a . u``.  A source at 0 degrees sits
beyond the reference end of the array, so every other microphone hears it
later by ``d_i cos(doa) / c`` seconds, matching the phase sign of
:func:`mcsep.features.steering_vector`.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.signal import butter, fftconvolve, sosfilt

from .spectral import MultiChannelWaveform

__all__ = [
    "ArrayGeometry",
    "RoomSpec",
    "SceneSpec",
    "SceneRanges",
    "ImpulseResponse",
    "MixtureBundle",
    "simulate_rir",
    "simulate_rirs",
    "estimate_t60",
    "sample_scene",
    "scene_from_doas",
    "synthesize_mixture",
    "far_field_signals",
    "fractional_delay_kernel",
    "RoomGeometryError",
    "NonLinearGeometryError",
]

SABINE_CONSTANT = 24.0 * math.log(10.0)
FD_TAPS = 81
FD_HALF = FD_TAPS // 2
MAX_ORDER_CAP = 30
ABSORPTION_MODELS = ("calibrated", "sabine")
DEFAULT_GAPS_CM = (8, 8, 8, 4, 4, 2, 2)


class RoomGeometryError(ValueError):
    pass


class NonLinearGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ArrayGeometry:
    mic_positions_relative: np.ndarray
    reference_index: int = 0

    def __post_init__(self):
        p = np.asarray(self.mic_positions_relative, dtype=np.float64)
        if p.ndim == 1:
            p = np.stack([p, np.zeros_like(p), np.zeros_like(p)], axis=1)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"mic positions must be [R, 3], got {p.shape}")
        if len(p) < 1:
            raise ValueError("need at least one microphone")
        if not 0 <= self.reference_index < len(p):
            raise ValueError(f"reference_index {self.reference_index} out of range")
        diffs = np.linalg.norm(p[:, None] - p[None], axis=-1)
        if np.any(diffs[~np.eye(len(p), dtype=bool)] < 1e-9):
            raise ValueError("microphone positions must be distinct")
        object.__setattr__(self, "mic_positions_relative", p)

    @classmethod
    def from_gaps(cls, gaps_cm: Sequence[float] = DEFAULT_GAPS_CM, reference_index: int = 0):
        """Symmetric linear array: ``gaps_cm`` run from the outer mic to the centre mic
        and are mirrored on the other side."""
        gaps = np.asarray(list(gaps_cm) + list(gaps_cm)[::-1], dtype=np.float64) / 100.0
        x = np.concatenate([[0.0], np.cumsum(gaps)])
        return cls(x - x.mean(), reference_index)

    @property
    def num_mics(self) -> int:
        return len(self.mic_positions_relative)

    def axis(self) -> np.ndarray:
        p = self.mic_positions_relative
        if self.num_mics == 1:
            return np.array([1.0, 0.0, 0.0])
        a = p[-1] - p[0]
        return a / np.linalg.norm(a)

    def is_linear(self, tol: float = 1e-9) -> bool:
        p = self.mic_positions_relative - self.mic_positions_relative[0]
        a = self.axis()
        off_axis = p - np.outer(p @ a, a)
        return bool(np.all(np.linalg.norm(off_axis, axis=1) < tol))

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        p = self.mic_positions_relative
        sums = p + p[::-1]
        return bool(np.all(np.abs(sums - sums[0]) < tol))

    def axis_distances(self) -> np.ndarray:
        """Signed distance of every mic from the reference mic along the array axis."""
        if not self.is_linear():
            raise NonLinearGeometryError("geometry is not linear; no single array axis exists")
        p = self.mic_positions_relative
        return (p - p[self.reference_index]) @ self.axis()

    def place(self, center: Sequence[float], azimuth: float) -> np.ndarray:
        """Absolute mic positions: array centroid at ``center``, axis rotated by
        ``azimuth`` radians in the horizontal plane."""
        p = self.mic_positions_relative - self.mic_positions_relative.mean(axis=0)
        c, s = math.cos(azimuth), math.sin(azimuth)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return p @ rot.T + np.asarray(center, dtype=np.float64)

    def doa_deg(self, center: Sequence[float], azimuth: float, source: Sequence[float]) -> float:
        placed = self.place(center, azimuth)
        a = placed[-1] - placed[0]
        a /= np.linalg.norm(a)
        u = np.asarray(source, dtype=np.float64) - np.asarray(center, dtype=np.float64)
        u /= np.linalg.norm(u)
        return float(np.degrees(np.arccos(np.clip(-a @ u, -1.0, 1.0))))

    def to_dict(self) -> dict:
        return {"mic_positions_relative": self.mic_positions_relative.tolist(),
                "reference_index": self.reference_index}


@dataclass(frozen=True)
class RoomSpec:
    dimensions: tuple[float, float, float]
    t60: float
    speed_of_sound: float = 343.0
    absorption_model: str = "calibrated"

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != 3 or min(dims) <= 0:
            raise RoomGeometryError(f"room dimensions must be three positive lengths, got {dims}")
        if self.t60 < 0:
            raise RoomGeometryError("t60 must be non-negative")
        if self.absorption_model not in ABSORPTION_MODELS:
            raise ValueError(f"absorption_model must be one of {ABSORPTION_MODELS}")
        object.__setattr__(self, "dimensions", dims)

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + lx * lz + ly * lz)

    def min_t60(self) -> float:
        """Shortest T60 Sabine's formula can reach (fully absorbing walls)."""
        return SABINE_CONSTANT * self.volume / (self.speed_of_sound * self.surface)

    def absorption(self) -> float:
        """Uniform wall absorption from Sabine's formula."""
        if self.t60 == 0:
            return 1.0
        alpha = self.min_t60() / self.t60
        if alpha > 1.0:
            raise RoomGeometryError(
                f"t60={self.t60:.3f}s is unreachable in a {self.dimensions} room "
                f"(Sabine absorption {alpha:.2f} > 1); use a larger room or t60 >= "
                f"{self.min_t60():.3f}s")
        return alpha

    def reflection_coefficient(self, max_order: int | None = None,
                               sample_rate: int = 16000) -> float:
        """Wall pressure reflection coefficient.

        ``sabine`` returns ``sqrt(1 - alpha)`` directly.  ``calibrated`` starts
        from the same Sabine feasibility check, then tunes the coefficient so
        the image lattice's own energy decay reaches -60 dB at ``t60``.
        """
        alpha = self.absorption()
        if self.absorption_model == "sabine" or self.t60 == 0:
            return math.sqrt(1.0 - alpha)
        order = self.default_max_order() if max_order is None else max_order
        return _calibrated_beta(self.dimensions, self.t60, self.speed_of_sound, order, sample_rate)

    def default_max_order(self) -> int:
        return min(MAX_ORDER_CAP, math.ceil(self.t60 * self.speed_of_sound / min(self.dimensions)))

    def contains(self, point: Sequence[float], margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p > margin) and np.all(p < np.asarray(self.dimensions) - margin))

    def to_dict(self) -> dict:
        return {"dimensions": list(self.dimensions), "t60": self.t60,
                "speed_of_sound": self.speed_of_sound, "absorption_model": self.absorption_model}


@dataclass(frozen=True)
class ImpulseResponse:
    taps: np.ndarray
    sample_rate: int


def fractional_delay_kernel(delays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed sinc taps for each (possibly fractional) delay in samples.

    Returns integer tap indices and weights, both shaped ``delays.shape + (81,)``.
    """
    delays = np.asarray(delays, dtype=np.float64)
    centre = np.round(delays).astype(np.int64)
    k = np.arange(-FD_HALF, FD_HALF + 1)
    idx = centre[..., None] + k
    t = idx - delays[..., None]
    weights = np.sinc(t) * 0.5 * (1.0 + np.cos(2.0 * np.pi * t / FD_TAPS))
    return idx, weights


def _axis_images(src: float, length: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    # image coordinate (1 - 2p) src + 2 n L hits the two walls |n - p| and |n| times
    n = np.arange(-order, order + 1)
    coords, counts = [], []
    for p in (0, 1):
        refl = np.abs(n - p) + np.abs(n)
        keep = refl <= order
        coords.append((1 - 2 * p) * src + 2 * n[keep] * length)
        counts.append(refl[keep])
    return np.concatenate(coords), np.concatenate(counts)


def _image_sources(room: RoomSpec, source: np.ndarray, order: int):
    ax = [_axis_images(source[i], room.dimensions[i], order) for i in range(3)]
    (cx, kx), (cy, ky), (cz, kz) = ax
    k = kx[:, None, None] + ky[None, :, None] + kz[None, None, :]
    keep = k <= order
    ix, iy, iz = np.nonzero(keep)
    pos = np.stack([cx[ix], cy[iy], cz[iz]], axis=1)
    return pos, k[keep]


def simulate_rirs(room: RoomSpec, source: Sequence[float], mics: np.ndarray,
                  sample_rate: int = 16000, max_order: int | None = None,
                  length: int | None = None, highpass_hz: float | None = 100.0) -> np.ndarray:
    """Image-source impulse responses from one source to every row of ``mics``.

    Returns ``[num_mics, length]``.  Taps that would land before sample 0 are
    dropped (only happens for sources within ~0.9 m of a mic).  When
    reflections are present a causal 2nd-order high-pass at ``highpass_hz``
    removes the low-frequency build-up of the all-positive image pulses.
    """
    source = np.asarray(source, dtype=np.float64)
    mics = np.atleast_2d(np.asarray(mics, dtype=np.float64))
    if not room.contains(source):
        raise RoomGeometryError(f"source {source.tolist()} is outside the room {room.dimensions}")
    for m in mics:
        if not room.contains(m):
            raise RoomGeometryError(f"microphone {m.tolist()} is outside the room {room.dimensions}")
    if max_order is None:
        max_order = room.default_max_order()
    beta = room.reflection_coefficient(max_order, sample_rate) if max_order > 0 else 0.0
    c = room.speed_of_sound

    direct = np.linalg.norm(mics - source, axis=1) / c * sample_rate
    if length is None:
        length = int(math.ceil(direct.max() + room.t60 * sample_rate)) + FD_HALF + 1

    images, refl = _image_sources(room, source, max_order)
    gains = beta ** refl
    out = np.zeros((len(mics), length))
    # bounded working set: chunk * 81 taps per mic
    chunk = max(1, 200_000 // FD_TAPS)
    for m, mic in enumerate(mics):
        dist = np.linalg.norm(images - mic, axis=1)
        delay = dist / c * sample_rate
        live = delay < length + FD_HALF
        dist, delay, g = dist[live], delay[live], gains[live]
        amp = g / (4.0 * np.pi * dist)
        acc = np.zeros(length)
        for s in range(0, len(delay), chunk):
            idx, w = fractional_delay_kernel(delay[s:s + chunk])
            w = w * amp[s:s + chunk, None]
            ok = (idx >= 0) & (idx < length)
            acc += np.bincount(idx[ok], weights=w[ok], minlength=length)
        out[m] = acc
    if max_order > 0 and highpass_hz:
        out = sosfilt(butter(2, highpass_hz, "highpass", fs=sample_rate, output="sos"), out, axis=1)
    return out


def simulate_rir(room: RoomSpec, source: Sequence[float], mic: Sequence[float],
                 max_order: int | None = None, sample_rate: int = 16000,
                 length: int | None = None, highpass_hz: float | None = 100.0) -> ImpulseResponse:
    taps = simulate_rirs(room, source, np.asarray(mic, dtype=np.float64)[None],
                         sample_rate=sample_rate, max_order=max_order, length=length,
                         highpass_hz=highpass_hz)[0]
    return ImpulseResponse(taps, sample_rate)


def estimate_t60(taps: np.ndarray, sample_rate: int, fit_range_db=(-5.0, -25.0)) -> float:
    """Schroeder backward integration followed by a line fit over ``fit_range_db``,
    extrapolated to -60 dB."""
    return _decay_t60(np.asarray(taps, dtype=np.float64) ** 2, sample_rate, fit_range_db)


def _decay_t60(energy: np.ndarray, sample_rate: int, fit_range_db=(-5.0, -25.0)) -> float:
    edc = np.cumsum(energy[::-1])[::-1]
    edc_db = 10.0 * np.log10(np.maximum(edc / edc[0], 1e-300))
    hi, lo = fit_range_db
    sel = np.nonzero((edc_db <= hi) & (edc_db >= lo))[0]
    if len(sel) < 2:
        raise ValueError("decay curve does not span the fit range")
    t = sel / sample_rate
    slope, _ = np.polyfit(t, edc_db[sel], 1)
    return float(-60.0 / slope)


# fixed probe pairs (fractions of the room size) used for calibration
_PROBES = (((0.31, 0.43, 0.47), (0.62, 0.55, 0.38)),
           ((0.55, 0.27, 0.52), (0.41, 0.68, 0.33)),
           ((0.72, 0.61, 0.29), (0.36, 0.38, 0.58)))


@functools.lru_cache(maxsize=256)
def _calibrated_beta(dims: tuple, t60: float, c: float, order: int, fs: int) -> float:
    room = RoomSpec(dims, t60, c, "sabine")
    length = int(math.ceil(t60 * fs)) + int(math.ceil(np.linalg.norm(dims) / c * fs))
    lattices = []
    for src, rcv in _PROBES:
        images, refl = _image_sources(room, np.asarray(dims) * src, order)
        dist = np.linalg.norm(images - np.asarray(dims) * rcv, axis=1)
        n = np.round(dist / c * fs).astype(np.int64)
        keep = n < length
        lattices.append((n[keep], refl[keep], dist[keep]))

    def mismatch(beta):
        est = []
        for n, refl, dist in lattices:
            energy = np.bincount(n, weights=beta ** (2 * refl) / dist ** 2, minlength=length)
            try:
                est.append(_decay_t60(energy, fs))
            except ValueError:
                # direct path only: the curve drops straight past the fit range
                est.append(0.0)
        return float(np.mean(est)) - t60

    # bracket from the Sabine value; decay is monotone in beta below the
    # point where order/length truncation starts to bite
    sabine = math.sqrt(1.0 - room.absorption())
    if mismatch(sabine) > 0:
        lo, hi = 1e-3, sabine
    else:
        lo = hi = sabine
        for k in range(1, 16):
            hi = 1.0 - (1.0 - sabine) * 0.5 ** k
            if mismatch(hi) > 0:
                break
            lo = hi
        else:
            return hi
    return float(brentq(mismatch, lo, hi, xtol=1e-6))


@dataclass(frozen=True)
class SceneRanges:
    room_min: tuple[float, float, float] = (4.0, 4.0, 2.5)
    room_max: tuple[float, float, float] = (10.0, 8.0, 6.0)
    t60: tuple[float, float] = (0.05, 0.7)
    distance: tuple[float, float] = (1.0, 5.0)
    sir_choices: tuple[float, ...] = (-6.0, 0.0, 6.0)
    overlap: tuple[float, float] = (0.6, 1.0)
    array_height: tuple[float, float] = (1.0, 1.5)
    source_height: tuple[float, float] = (1.2, 1.9)
    wall_margin: float = 0.5
    speed_of_sound: float = 343.0

    def __post_init__(self):
        pairs = {"t60": self.t60, "distance": self.distance, "overlap": self.overlap,
                 "array_height": self.array_height, "source_height": self.source_height}
        for name, (lo, hi) in pairs.items():
            if not lo <= hi:
                raise ValueError(f"empty {name} range ({lo}, {hi})")
        if any(a > b for a, b in zip(self.room_min, self.room_max)) or min(self.room_min) <= 0:
            raise ValueError("invalid room dimension range")
        if not self.sir_choices:
            raise ValueError("sir_choices must not be empty")
        if not (0.0 <= self.overlap[0] and self.overlap[1] <= 1.0):
            raise ValueError("overlap ratios must lie in [0, 1]")
        if self.distance[0] <= 0 or self.t60[0] < 0:
            raise ValueError("distance must be positive and t60 non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRanges":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class SceneSpec:
    room: RoomSpec
    array_center: tuple[float, float, float]
    array_azimuth: float
    target_position: tuple[float, float, float]
    interferer_position: tuple[float, float, float]
    target_doa_deg: float
    interferer_doa_deg: float
    sir_db: float
    overlap_ratio: float
    placement: float
    seed: int | None = None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "room"}
        for k in ("array_center", "target_position", "interferer_position"):
            d[k] = list(d[k])
        d["room"] = self.room.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        room = d.pop("room")
        room = RoomSpec(tuple(room["dimensions"]), room["t60"], room["speed_of_sound"],
                        room.get("absorption_model", "calibrated"))
        for k in ("array_center", "target_position", "interferer_position"):
            d[k] = tuple(d[k])
        return cls(room=room, **d)


def _place_source(rng, room: RoomSpec, center: np.ndarray, ranges: SceneRanges):
    for _ in range(1000):
        dist = rng.uniform(*ranges.distance)
        height = min(rng.uniform(*ranges.source_height), room.dimensions[2] - ranges.wall_margin)
        dz = height - center[2]
        if abs(dz) >= dist:
            continue
        az = rng.uniform(0.0, 2.0 * np.pi)
        r = math.sqrt(dist * dist - dz * dz)
        pos = center + np.array([r * math.cos(az), r * math.sin(az), dz])
        if room.contains(pos, ranges.wall_margin):
            return pos
    return None


def sample_scene(seed: int, ranges: SceneRanges = SceneRanges(),
                 geometry: ArrayGeometry | None = None) -> SceneSpec:
    """Draw one randomized two-speaker scene; identical output for identical ``seed``."""
    geometry = ArrayGeometry.from_gaps() if geometry is None else geometry
    rng = np.random.default_rng(seed)
    half_aperture = np.max(np.linalg.norm(
        geometry.mic_positions_relative - geometry.mic_positions_relative.mean(0), axis=1))
    sir = float(rng.choice(np.asarray(ranges.sir_choices, dtype=np.float64)))
    overlap = float(rng.uniform(*ranges.overlap))
    placement = float(rng.uniform(0.0, 1.0))
    for _ in range(1000):
        dims = tuple(float(rng.uniform(lo, hi)) for lo, hi in zip(ranges.room_min, ranges.room_max))
        probe = RoomSpec(dims, 1.0, ranges.speed_of_sound)
        t60_lo = max(ranges.t60[0], probe.min_t60() * 1.001)
        if t60_lo > ranges.t60[1]:
            continue
        room = RoomSpec(dims, float(rng.uniform(t60_lo, ranges.t60[1])), ranges.speed_of_sound)
        margin = ranges.wall_margin + half_aperture
        if min(dims[:2]) <= 2 * margin:
            continue
        center = np.array([rng.uniform(margin, dims[0] - margin),
                           rng.uniform(margin, dims[1] - margin),
                           min(rng.uniform(*ranges.array_height), dims[2] - ranges.wall_margin)])
        azimuth = float(rng.uniform(0.0, 2.0 * np.pi))
        target = _place_source(rng, room, center, ranges)
        interferer = _place_source(rng, room, center, ranges)
        if target is None or interferer is None:
            continue
        return SceneSpec(
            room=room,
            array_center=tuple(center.tolist()),
            array_azimuth=azimuth,
            target_position=tuple(target.tolist()),
            interferer_position=tuple(interferer.tolist()),
            target_doa_deg=geometry.doa_deg(center, azimuth, target),
            interferer_doa_deg=geometry.doa_deg(center, azimuth, interferer),
            sir_db=sir,
            overlap_ratio=overlap,
            placement=placement,
            seed=seed,
        )
    raise ValueError("could not place array and sources inside any sampled room; check ranges")


def scene_from_doas(target_doa_deg: float, interferer_doa_deg: float, *,
                    room: RoomSpec, array_center: Sequence[float], array_azimuth: float,
                    distances: tuple[float, float], sir_db: float = 0.0,
                    overlap_ratio: float = 1.0, placement: float = 0.0,
                    geometry: ArrayGeometry | None = None, seed: int | None = None) -> SceneSpec:
    """Place both sources in the array's horizontal plane at the given DOAs."""
    geometry = ArrayGeometry.from_gaps() if geometry is None else geometry
    center = np.asarray(array_center, dtype=np.float64)
    placed = geometry.place(center, array_azimuth)
    a = placed[-1] - placed[0]
    a /= np.linalg.norm(a)
    normal = np.array([-a[1], a[0], 0.0])

    def position(doa, dist):
        th = math.radians(doa)
        return center + dist * (-math.cos(th) * a + math.sin(th) * normal)

    tp, ip = position(target_doa_deg, distances[0]), position(interferer_doa_deg, distances[1])
    for p in (tp, ip):
        if not room.contains(p):
            raise RoomGeometryError(f"source {p.tolist()} falls outside the room")
    return SceneSpec(room, tuple(center.tolist()), float(array_azimuth), tuple(tp.tolist()),
                     tuple(ip.tolist()), float(target_doa_deg), float(interferer_doa_deg),
                     float(sir_db), float(overlap_ratio), float(placement), seed)


@dataclass
class MixtureBundle:
    mixture: MultiChannelWaveform
    target_reverberant: MultiChannelWaveform
    interferer_reverberant: MultiChannelWaveform
    overlap_region: tuple[int, int]
    interferer_gain: float
    measured_sir_db: float = field(default=float("nan"))


def _mono(wave: MultiChannelWaveform, name: str) -> np.ndarray:
    if wave.num_channels != 1:
        raise ValueError(f"{name} must be single-channel, got {wave.num_channels} channels")
    return wave.samples[0]


def synthesize_mixture(scene: SceneSpec, target: MultiChannelWaveform,
                       interferer: MultiChannelWaveform,
                       geometry: ArrayGeometry | None = None,
                       max_order: int | None = None) -> MixtureBundle:
    """Reverberate both sources, offset the interferer to hit the overlap ratio,
    scale it to the requested SIR and sum.

    ``round(overlap_ratio * len(target))`` samples of the target are overlapped.
    The interferer leads the target when ``scene.placement < 0.5`` and lags it
    otherwise; the mixture spans both utterances.  The SIR is measured over
    the overlapped region on all channels after reverberation.
    """
    geometry = ArrayGeometry.from_gaps() if geometry is None else geometry
    if target.sample_rate != interferer.sample_rate:
        raise ValueError("target and interferer sample rates differ")
    fs = target.sample_rate
    s = _mono(target, "target")
    v = _mono(interferer, "interferer")
    n_t, n_i = len(s), len(v)
    ovl = int(round(scene.overlap_ratio * n_t))
    if n_i < ovl:
        raise ValueError(f"interferer has {n_i} samples but the overlap needs {ovl}")
    # interferer start relative to target start
    offset = ovl - n_i if scene.placement < 0.5 else n_t - ovl
    t0, i0 = max(0, -offset), max(0, offset)
    total = max(t0 + n_t, i0 + n_i)
    dry_t = np.zeros(total)
    dry_t[t0:t0 + n_t] = s
    dry_i = np.zeros(total)
    dry_i[i0:i0 + n_i] = v

    mics = geometry.place(scene.array_center, scene.array_azimuth)
    h_t = simulate_rirs(scene.room, scene.target_position, mics, fs, max_order)
    h_i = simulate_rirs(scene.room, scene.interferer_position, mics, fs, max_order)
    y_t = fftconvolve(dry_t[None], h_t, axes=1)[:, :total]
    y_i = fftconvolve(dry_i[None], h_i, axes=1)[:, :total] if np.any(v) else np.zeros_like(y_t)

    start = max(t0, i0)
    region = slice(start, start + ovl)
    e_t = np.sum(y_t[:, region] ** 2)
    e_i = np.sum(y_i[:, region] ** 2)
    gain = math.sqrt(e_t / (e_i * 10.0 ** (scene.sir_db / 10.0))) if e_i > 0 else 1.0
    y_i = y_i * gain
    e_i = np.sum(y_i[:, region] ** 2)
    measured = 10.0 * math.log10(e_t / e_i) if e_i > 0 and e_t > 0 else float("inf")
    return MixtureBundle(
        mixture=MultiChannelWaveform(y_t + y_i, fs),
        target_reverberant=MultiChannelWaveform(y_t, fs),
        interferer_reverberant=MultiChannelWaveform(y_i, fs),
        overlap_region=(start, start + ovl),
        interferer_gain=gain,
        measured_sir_db=measured,
    )


def far_field_signals(source: MultiChannelWaveform, geometry: ArrayGeometry, doa_deg: float,
                      speed_of_sound: float = 343.0) -> MultiChannelWaveform:
    """Anechoic plane-wave capture: channel ``i`` is the source delayed by
    ``d_i cos(doa) / c``, applied as an exact frequency-domain phase shift on a
    zero-padded copy of the signal."""
    s = _mono(source, "source")
    fs = source.sample_rate
    tau = geometry.axis_distances() * math.cos(math.radians(doa_deg)) / speed_of_sound
    pad = int(math.ceil(np.max(np.abs(tau)) * fs)) + 1
    n = len(s) + 2 * pad
    spec = np.fft.rfft(np.pad(s, pad), n=n)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    shifted = np.fft.irfft(spec[None] * np.exp(-2j * np.pi * freqs[None] * tau[:, None]), n=n)
    return MultiChannelWaveform(shifted[:, pad:pad + len(s)], fs)
