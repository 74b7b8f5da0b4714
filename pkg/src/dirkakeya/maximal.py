"""Directional maximal averages over line segments on a raster.

The raster has ``2**m`` columns over ``x in [0, 2]`` and ``3 * 2**m`` rows
over ``y in [0, 3)``; row 0 is the bottom.  Segments are sampled every
``2**-m`` in x (two samples per column) along a digital line of slope
``theta``.  A segment of half-length ``l`` covers ``K = 2 l 2**m`` samples,
and every window of ``K`` samples containing the pixel's sample is a
candidate (the maximal function is uncentered).  Samples that leave the
domain read zero.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d

from .dyadic_tree import DirTree
from .structure import split_numbers

_MAGIC = b"DKRI"


@dataclass(frozen=True, eq=False)
class RasterImage:
    m: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != raster_shape(self.m):
            raise ValueError(f"expected shape {raster_shape(self.m)}, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("raster values must be finite and nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def pixel_area(self) -> float:
        return 2.0 ** (1 - 2 * self.m)

    def norm(self, p: float) -> float:
        if math.isinf(p):
            return float(self.values.max())
        return float((np.sum(self.values ** p) * self.pixel_area) ** (1 / p))

    def support_size(self) -> int:
        return int(np.count_nonzero(self.values))

    @classmethod
    def zeros(cls, m: int) -> "RasterImage":
        return cls(m, np.zeros(raster_shape(m)))

    @classmethod
    def constant(cls, m: int, c: float = 1.0) -> "RasterImage":
        return cls(m, np.full(raster_shape(m), float(c)))

    def to_bytes(self) -> bytes:
        rows, cols = self.shape
        return _MAGIC + struct.pack("<3q", self.m, rows, cols) + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RasterImage":
        if data[:4] != _MAGIC:
            raise ValueError("not a raster file")
        m, rows, cols = struct.unpack("<3q", data[4:28])
        vals = np.frombuffer(data[28:], dtype="<f8")
        if vals.size != rows * cols:
            raise ValueError("raster payload size does not match header")
        return cls(int(m), vals.reshape(rows, cols))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "RasterImage":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "value"])
        for r, c in zip(*np.nonzero(self.values)):
            w.writerow([int(r), int(c), repr(float(self.values[r, c]))])
        return buf.getvalue()


def raster_shape(m: int) -> tuple[int, int]:
    if m < 1:
        raise ValueError("raster resolution m must be at least 1")
    return 3 << m, 1 << m


def pixel_centers(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Center abscissas per column and ordinates per row."""
    rows, cols = raster_shape(m)
    return (np.arange(cols) + 0.5) * 2.0 ** (1 - m), (np.arange(rows) + 0.5) * 2.0 ** (-m)


@dataclass(frozen=True)
class DirectionSet:
    slopes: tuple[Fraction, ...]
    split: int | None = None

    def __post_init__(self):
        s = tuple(sorted({Fraction(x) for x in self.slopes}))
        if any(not 0 <= x <= 1 for x in s):
            raise ValueError("slopes must lie in [0, 1]")
        object.__setattr__(self, "slopes", s)

    def __len__(self) -> int:
        return len(self.slopes)

    @classmethod
    def from_tree(cls, tree: DirTree) -> "DirectionSet":
        return cls(tuple(tree.slopes()), split_numbers(tree).tree_split)


def dyadic_lengths(m: int, longest: int = 0) -> tuple[Fraction, ...]:
    """Half-lengths ``2**-k`` from ``2**-longest`` down to a single sample."""
    return tuple(Fraction(1, 1 << k) for k in range(longest, m + 2))


def certification_lengths(m: int, depth: int = 6) -> tuple[Fraction, ...]:
    """Dyadic half-lengths plus ``1 - 2**-(k+1)`` so segments starting near ``x = 0`` can reach ``x`` close to 2."""
    extra = tuple(1 - Fraction(1, 1 << (k + 1)) for k in range(1, min(depth, m) + 1))
    return tuple(sorted(set(dyadic_lengths(m) + extra), reverse=True))


def _line_offsets(theta: Fraction, n: int) -> np.ndarray:
    # row shift of the digital line at sample k: floor(1/2 + theta (k + 1/2))
    a, b = theta.numerator, theta.denominator
    k = np.arange(n, dtype=np.int64)
    return (b + a * (2 * k + 1)) // (2 * b)


def _window_counts(half_length: Fraction, m: int) -> int:
    K = 2 * half_length * (1 << m)
    if K.denominator != 1 or K < 1:
        raise ValueError(f"half-length {half_length} is not a whole number of samples at m={m}")
    if half_length > 2:
        raise ValueError("half-lengths must be at most 2")
    return int(K)


def _theta_maximal(vals: np.ndarray, theta: Fraction, Ks: Sequence[int],
                   need: np.ndarray | None = None) -> np.ndarray:
    rows, cols = vals.shape
    n = 2 * cols
    g = _line_offsets(theta, n)
    c = np.arange(cols)
    # pixel (row, c) reads line q = row - g(2c) at sample 2c
    qpix = np.arange(rows)[:, None] - g[2 * c][None, :]
    if need is None:
        lines = np.arange(-int(g[-1]), rows)
    else:
        lines = np.unique(qpix[need])
    Q = len(lines)
    r = lines[:, None] + g[None, :]
    inside = (r >= 0) & (r < rows)
    col = np.arange(n) // 2
    A = np.where(inside, vals[np.clip(r, 0, rows - 1), col[None, :]], 0.0)
    best = np.zeros((Q, n))
    for K in Ks:
        pad = np.zeros((Q, n + 2 * K))
        pad[:, K:K + n] = A
        C = np.concatenate([np.zeros((Q, 1)), np.cumsum(pad, axis=1)], axis=1)
        # window starting at padded index s covers pad[s:s+K]; windows containing sample k start in [k+1, k+K]
        W = C[:, K:] - C[:, :-K]
        F = maximum_filter1d(W, size=K, axis=1, mode="constant")
        # the centered filter at index i spans [i - K//2, i - K//2 + K - 1]
        shift = 1 + K // 2
        best = np.maximum(best, F[:, shift:shift + n] / K)
    out = np.zeros((rows, cols))
    if need is None:
        return best[qpix - lines[0], 2 * c[None, :]]
    rr, cc = np.nonzero(need)
    out[rr, cc] = best[np.searchsorted(lines, qpix[rr, cc]), 2 * cc]
    return out


def maximal_transform(f: RasterImage, omega: DirectionSet | Iterable, lengths: Iterable = None) -> RasterImage:
    """Largest segment average through each pixel over the given slopes and half-lengths."""
    if not isinstance(omega, DirectionSet):
        omega = DirectionSet(tuple(omega))
    if len(omega) == 0:
        raise ValueError("direction set is empty")
    lengths = dyadic_lengths(f.m) if lengths is None else tuple(Fraction(x) for x in lengths)
    if not lengths:
        raise ValueError("no segment lengths given")
    Ks = sorted({_window_counts(l, f.m) for l in lengths})
    out = np.zeros(f.shape)
    for theta in omega.slopes:
        out = np.maximum(out, _theta_maximal(f.values, theta, Ks))
    return RasterImage(f.m, out)


def _witness_maximal(f: RasterImage, targets: np.ndarray, witnesses: dict[Fraction, np.ndarray],
                     Ks: Sequence[int]) -> np.ndarray:
    out = np.zeros(f.shape)
    for theta, mask in witnesses.items():
        sel = mask & targets
        if not sel.any():
            continue
        out = np.maximum(out, _theta_maximal(f.values, theta, Ks, need=sel))
    return out


@dataclass(frozen=True)
class NormLowerBound:
    bound: float
    ratio: Fraction
    p: float
    candidates: int
    certified: int
    base: int

    @property
    def trimmed(self) -> int:
        return self.candidates - self.certified


def norm_lower_bound(E: RasterImage, Estar: RasterImage, omega: DirectionSet | Iterable, p: float,
                     lengths: Iterable = None, witnesses: dict | None = None,
                     threshold: float = 0.5) -> NormLowerBound:
    """Certified lower bound ``(|E*| / |E|)**(1/p) / 2`` for the operator norm on L^p.

    Pixels of ``Estar`` where the maximal average of the indicator of ``E``
    does not exceed ``threshold`` are trimmed before counting.  ``witnesses``
    optionally maps slopes to pixel masks; each pixel is then tested only
    along its own slopes, which can only trim more and keeps the bound valid.
    """
    if not isinstance(omega, DirectionSet):
        omega = DirectionSet(tuple(omega))
    ind = RasterImage(E.m, (E.values > 0).astype(float))
    base = ind.support_size()
    if base == 0:
        raise ValueError("E is empty")
    lengths = certification_lengths(E.m) if lengths is None else tuple(Fraction(x) for x in lengths)
    Ks = sorted({_window_counts(l, E.m) for l in lengths})
    targets = Estar.values > 0
    if witnesses is None:
        Mv = maximal_transform(ind, omega, lengths).values
    else:
        Mv = _witness_maximal(ind, targets, {Fraction(k): v for k, v in witnesses.items()}, Ks)
    certified = int(np.count_nonzero(targets & (Mv > threshold + 1e-12)))
    ratio = Fraction(certified, base)
    if math.isinf(p):
        bound = 0.5 if certified else 0.0
    else:
        bound = float(ratio) ** (1 / p) / 2
    return NormLowerBound(bound, ratio, p, int(targets.sum()), certified, base)


@dataclass(frozen=True)
class NormStatistic:
    value: float
    p: float
    split: int | None
    argmax: int
    ratios: tuple[float, ...]


def empirical_norm(omega: DirectionSet | Iterable, p: float, images: Sequence[RasterImage],
                   lengths: Iterable = None) -> NormStatistic:
    """Largest ``||Mf||_p / ||f||_p`` over the trial images."""
    if not isinstance(omega, DirectionSet):
        omega = DirectionSet(tuple(omega))
    if not images:
        raise ValueError("no trial images")
    ratios = []
    for f in images:
        nf = f.norm(p)
        if nf == 0:
            raise ValueError("trial image is identically zero")
        ratios.append(maximal_transform(f, omega, lengths).norm(p) / nf)
    i = int(np.argmax(ratios))
    return NormStatistic(ratios[i], p, omega.split, i, tuple(ratios))


# -- rasterizing parallelogram families ------------------------------------------------


def _coverage(k: np.ndarray, s: np.ndarray, h: int, m: int, cols_in: np.ndarray) -> np.ndarray:
    # center row r lies in [L, L + 2**-h) iff ceil(L 2**m - 1/2) <= r < ceil((L + 2**-h) 2**m - 1/2)
    rows, cols = raster_shape(m)
    xc, _ = pixel_centers(m)
    scale = 1 << m
    left = (k[None, :] + xc[cols_in, None] * s[None, :]) / (1 << h)
    lo = np.clip(np.ceil(left * scale - 0.5).astype(np.int64), 0, rows)
    hi = np.clip(np.ceil((left + 2.0 ** -h) * scale - 0.5).astype(np.int64), 0, rows)
    diff = np.zeros((rows + 1, cols), dtype=np.int64)
    cc = np.broadcast_to(cols_in[:, None], lo.shape)
    np.add.at(diff, (lo.ravel(), cc.ravel()), 1)
    np.add.at(diff, (hi.ravel(), cc.ravel()), -1)
    return np.cumsum(diff, axis=0)[:rows] > 0


def _columns(m: int, x_range: tuple[float, float]) -> np.ndarray:
    xc, _ = pixel_centers(m)
    return np.nonzero((xc >= x_range[0]) & (xc < x_range[1]))[0]


def rasterize_family(family, m: int, x_range: tuple[float, float] = (0.0, 2.0)) -> RasterImage:
    """Indicator of the pixels whose centers lie in the family, restricted to ``x_range`` (half-open)."""
    cols_in = _columns(m, x_range)
    mask = _coverage(family.offsets.astype(float), family.slopes_array.astype(float), family.h, m, cols_in)
    return RasterImage(m, mask.astype(float))


def witness_masks(family, m: int, x_range: tuple[float, float] = (0.0, 2.0)) -> dict[Fraction, np.ndarray]:
    """For each slope, the pixels covered by members of the family with that slope."""
    cols_in = _columns(m, x_range)
    slopes = family.slopes_array
    k = family.offsets.astype(float)
    out = {}
    for num in np.unique(slopes):
        sel = slopes == num
        out[Fraction(int(num), 1 << family.h)] = _coverage(k[sel], slopes[sel].astype(float), family.h, m, cols_in)
    return out


def kakeya_pair(family, m: int) -> tuple[RasterImage, RasterImage]:
    """Raster of the family over ``x in [1, 2]`` and over ``x in [0, 1)``."""
    return rasterize_family(family, m, (1.0, 2.1)), rasterize_family(family, m, (0.0, 1.0))


def trial_suite(m: int, count: int = 20, seed: int = 0) -> list[RasterImage]:
    """Deterministic mix of point masses, small squares, thin bars and noise."""
    rng = np.random.default_rng(seed)
    rows, cols = raster_shape(m)
    out = []
    for i in range(count):
        v = np.zeros((rows, cols))
        kind = i % 5
        if kind == 0:
            v[rng.integers(rows), rng.integers(cols)] = 1.0
        elif kind == 1:
            side = int(rng.integers(1, max(2, cols // 8)))
            r, c = rng.integers(rows - side), rng.integers(cols - side)
            v[r:r + side, c:c + side] = 1.0
        elif kind == 2:
            r = rng.integers(rows)
            v[r, :] = 1.0
        elif kind == 3:
            v = (rng.random((rows, cols)) < 0.02).astype(float)
        else:
            v = rng.random((rows, cols)) ** 4
        if not v.any():
            v[0, 0] = 1.0
        out.append(RasterImage(m, v))
    return out
