"""Batch studies shared by the command line and the acceptance suite."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .dyadic_tree import DirTree, GeneratorSpec, build_tree, full_tree
from .geometry import build_family, overlap_sum, strip_area
from .percolation import cover_probability
from .structure import prune
from .sticky import sample_sticky

CSV_VERSION = 1


def derive_seed(master: int, *keys: int) -> int:
    """Stable 64-bit child seed for a (master, keys...) address."""
    ss = np.random.SeedSequence([master & ((1 << 64) - 1), *keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def strip_count(n: int) -> int:
    return int(math.floor(math.log2(n))) if n >= 1 else 0


def target_tree(kind: str, n: int, pattern: str = "branch,keep-left") -> DirTree:
    """Scaling-study target with splitting number ``n``."""
    if kind == "full":
        return full_tree(n)
    if kind == "cantor-pattern":
        steps = [s for s in pattern.split(",") if s]
        branches = sum(s == "branch" for s in steps)
        if branches == 0:
            raise ValueError("cantor pattern must branch")
        depth = -(-n * len(steps) // branches)
        tree = build_tree(GeneratorSpec("cantor-pattern", depth, {"pattern": pattern}))
        return tree
    raise ValueError(f"unsupported scaling target {kind!r}")


@dataclass
class ScalingRow:
    N: int
    seed_index: int
    seed: int
    h: int
    method: str
    strips: dict[int, float] = field(default_factory=dict)
    strip_exact: dict[int, Fraction] = field(default_factory=dict)
    overlaps: dict[int, float] = field(default_factory=dict)
    error: str = ""

    @property
    def area_base(self) -> float:
        return self.strips[0]

    @property
    def area_ext(self) -> float:
        return sum(self.strips[j] for j in range(1, strip_count(self.N) + 1))


def scaling_row(kind: str, n: int, index: int, master: int, method: str = "auto",
                pattern: str = "branch,keep-left", exact_overlap: bool | None = None) -> ScalingRow:
    seed = derive_seed(master, n, index)
    try:
        target = prune(target_tree(kind, n, pattern))
        sigma = sample_sticky(target, seed)
        fam = build_family(sigma)
        row = ScalingRow(n, index, seed, fam.h, "")
        exact_ov = fam.h <= 8 if exact_overlap is None else exact_overlap
        for j in range(0, strip_count(n) + 1):
            sm = strip_area(fam, j, method)
            row.method = sm.method
            row.strips[j] = float(sm.value)
            if sm.method == "exact":
                row.strip_exact[j] = sm.value
            row.overlaps[j] = float(overlap_sum(fam, j, exact=exact_ov))
        return row
    except Exception as exc:  # a failed row is recorded, the batch continues
        return ScalingRow(n, index, seed, -1, "failed", error=f"{type(exc).__name__}: {exc}")


def scaling_study(kind: str, ns: Iterable[int], seeds: int, master: int, method: str = "auto",
                  pattern: str = "branch,keep-left", workers: int = 1) -> list[ScalingRow]:
    jobs = [(kind, n, i, master, method, pattern) for n in ns for i in range(seeds)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_row_job, jobs, chunksize=4))
    return [scaling_row(*job) for job in jobs]


def _row_job(job):
    return scaling_row(*job)


def _fmt(x: float) -> str:
    return repr(float(x))


def header_line(kind: str) -> str:
    return f"# dirkakeya {__version__} {kind} csv-v{CSV_VERSION}\n"


def write_csv(kind: str, fieldnames: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(header_line(kind))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def area_table(rows: Sequence[ScalingRow]) -> str:
    """Per-strip areas and overlap sums, one line per (N, seed, j)."""
    out = []
    for r in rows:
        if r.error:
            out.append([r.seed, r.N, r.h, "", "failed", "", "", r.error])
            continue
        for j in sorted(r.strips):
            exact = r.strip_exact.get(j)
            out.append([r.seed, r.N, r.h, j, r.method, _fmt(r.strips[j]),
                        "" if exact is None else str(exact), _fmt(r.overlaps[j]), ""])
    return write_csv("areas", ["seed", "N", "h", "j", "method", "strip_area", "strip_area_exact",
                               "overlap_sum", "error"], out)


def scaling_table(rows: Sequence[ScalingRow]) -> str:
    out = []
    for r in rows:
        if r.error:
            out.append([r.N, r.seed_index, r.seed, "failed", "", "", r.error])
        else:
            out.append([r.N, r.seed_index, r.seed, r.method, _fmt(r.area_base), _fmt(r.area_ext), ""])
    return write_csv("scaling", ["N", "seed_index", "seed", "method", "area_base", "area_ext", "error"], out)


@dataclass(frozen=True)
class ScalingSummary:
    N: int
    min_base: float
    mean_base: float
    min_ext: float
    mean_ext: float
    rows: int

    @property
    def ext_over_min_base(self) -> float:
        return self.mean_ext / self.min_base


def summarize(rows: Sequence[ScalingRow]) -> list[ScalingSummary]:
    by_n: dict[int, list[ScalingRow]] = {}
    for r in rows:
        if not r.error:
            by_n.setdefault(r.N, []).append(r)
    out = []
    for n in sorted(by_n):
        base = [r.area_base for r in by_n[n]]
        ext = [r.area_ext for r in by_n[n]]
        out.append(ScalingSummary(n, min(base), float(np.mean(base)), min(ext), float(np.mean(ext)), len(base)))
    return out


def summary_table(summary: Sequence[ScalingSummary]) -> str:
    return write_csv("scaling-summary", ["N", "rows", "min_area_base", "mean_area_base", "min_area_ext",
                                         "mean_area_ext", "N_times_min_base", "ext_over_min_base"],
                     [[s.N, s.rows, _fmt(s.min_base), _fmt(s.mean_base), _fmt(s.min_ext), _fmt(s.mean_ext),
                       _fmt(s.N * s.min_base), _fmt(s.ext_over_min_base)] for s in summary])


def probe_points(count: int, seed: int, denominator: int = 64) -> list[tuple[Fraction, Fraction]]:
    """Rational points with ``x`` in ``(1, 2]`` and ``y`` in ``[0, 3)``."""
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(count):
        x = Fraction(int(rng.integers(denominator + 1, 2 * denominator + 1)), denominator)
        y = Fraction(int(rng.integers(0, 3 * denominator)), denominator)
        pts.append((x, y))
    return pts


def cover_rows(target_spec: Mapping, points: Sequence, trials: int, seed: int) -> list[list]:
    target = prune(build_tree(target_spec))
    rows = []
    for i, pt in enumerate(points):
        exact = cover_probability(pt, target, "exact")
        mc = cover_probability(pt, target, "mc", trials=trials, seed=derive_seed(seed, i))
        rows.append([i, str(pt[0]), str(pt[1]), str(exact), _fmt(exact), _fmt(mc.estimate), _fmt(mc.stderr),
                     trials, mc.seed])
    return rows
