"""Empirical quantization: chaos-game sampling, Lloyd codebooks, proxies.

The invariant measure is realized by random iteration of the cell maps with
an i.i.d. seeded driver; a Lloyd loop (nearest-point partition / per-cell
center update, with seeded restarts and farthest-point repair of empty cells)
estimates the k-point quantization error from the pool.  Antichain codebooks
place one point at the center of each threshold-antichain square, and the
theoretical proxy sums the antichain's weights; the two sides are what the
scaling-law checks compare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.spatial import cKDTree

from .antichain import Antichain
from .carpet import CarpetSpec
from .constants import SpectralConstants
from .words import rect

__all__ = [
    "BadK",
    "SamplePool",
    "Codebook",
    "LloydResult",
    "sample",
    "distortion",
    "distortion_stats",
    "lloyd",
    "lloyd_best",
    "antichain_codebook",
    "theoretical_proxy",
]

# Brute-force nearest neighbour above this codebook size would thrash memory;
# a KD-tree gives identical (exact) distances.
_TREE_THRESHOLD = 512
_CHUNK_ENTRIES = 4_000_000


class BadK(ValueError):
    """Requested codebook size is not in [1, pool size]."""


@dataclass(frozen=True, eq=False)
class SamplePool:
    """Chaos-game samples of the invariant measure (deterministic per seed)."""

    points: np.ndarray = field(repr=False)
    seed: int
    n: int
    burn_in: int


@dataclass(frozen=True, eq=False)
class Codebook:
    """A candidate k-point codebook."""

    points: np.ndarray = field(repr=False)
    k: int
    origin: str


@dataclass(frozen=True, eq=False)
class LloydResult:
    codebook: Codebook
    distortion: float
    iters: int
    repairs: int
    restarts_used: int = 1


def sample(spec: CarpetSpec, n: int, seed: int, burn_in: int = 64) -> SamplePool:
    """Run the chaos game: x <- f_IJ(x) with i.i.d. cell draws.

    The coordinate recurrences x <- (x+i)/n and y <- (y+j)/m are linear
    filters over the digit streams; both are evaluated with a C-level IIR
    filter, so pools are deterministic and cheap.  The first burn_in points
    are discarded (the start point decays geometrically).
    """
    if n < 1:
        raise ValueError(f"pool size must be >= 1, got {n}")
    if burn_in < 32:
        raise ValueError(f"burn-in must be >= 32, got {burn_in}")
    rng = np.random.default_rng(seed)
    probs = np.array([p for _, _, p in spec.entries], dtype=np.float64)
    probs = probs / probs.sum()
    draws = rng.choice(len(spec.entries), size=n + burn_in, p=probs)
    cols = np.array([i for i, _, _ in spec.entries], dtype=np.float64)[draws]
    rows = np.array([j for _, j, _ in spec.entries], dtype=np.float64)[draws]
    x0 = y0 = 0.5
    xs, _ = lfilter([1.0 / spec.n], [1.0, -1.0 / spec.n], cols, zi=np.array([x0 / spec.n]))
    ys, _ = lfilter([1.0 / spec.m], [1.0, -1.0 / spec.m], rows, zi=np.array([y0 / spec.m]))
    points = np.column_stack((xs[burn_in:], ys[burn_in:]))
    return SamplePool(points=points, seed=seed, n=n, burn_in=burn_in)


def _nearest(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels and exact squared distances (ties: lowest index).

    The argmin runs on |c|^2 - 2 p.c (the per-point |p|^2 term cannot change
    the winner), which is one BLAS matmul; the reported distance is then
    recomputed exactly for the chosen center only.
    """
    k = len(centers)
    if k > _TREE_THRESHOLD:
        dist, labels = cKDTree(centers).query(points)
        return labels.astype(np.int64), dist * dist
    c2 = np.einsum("ij,ij->i", centers, centers)
    n = len(points)
    labels = np.empty(n, dtype=np.int64)
    dmin2 = np.empty(n, dtype=np.float64)
    step = max(1, _CHUNK_ENTRIES // max(k, 1))
    for start in range(0, n, step):
        block = points[start : start + step]
        scores = c2[None, :] - 2.0 * (block @ centers.T)
        lab = np.argmin(scores, axis=1)
        diff = block - centers[lab]
        labels[start : start + step] = lab
        dmin2[start : start + step] = np.einsum("ij,ij->i", diff, diff)
    return labels, dmin2


def distortion(pool: SamplePool, cb: Codebook, r: float) -> float:
    """(1/n) sum of r-th powers of nearest-codeword distances over the pool."""
    _, dmin2 = _nearest(pool.points, cb.points)
    return float(np.mean(dmin2 ** (r / 2.0)))


def distortion_stats(
    pool: SamplePool, cb: Codebook, r: float, batches: int = 100
) -> tuple[float, float]:
    """Distortion plus a batch-means Monte-Carlo standard error.

    Consecutive chaos-game points are correlated (they share digits), so the
    i.i.d. stderr would understate; batch means over contiguous blocks are
    the standard correction.
    """
    _, dmin2 = _nearest(pool.points, cb.points)
    dr = dmin2 ** (r / 2.0)
    value = float(np.mean(dr))
    b = min(batches, len(dr))
    size = len(dr) // b
    means = dr[: b * size].reshape(b, size).mean(axis=1)
    stderr = float(np.std(means, ddof=1) / math.sqrt(b)) if b > 1 else float("inf")
    return value, stderr


def _cell_centers_r(
    points: np.ndarray, labels: np.ndarray, old: np.ndarray, r: float
) -> np.ndarray:
    """Per-cell center update for r != 2: damped gradient descent from the mean.

    50 fixed steps with step 0.5 / (local Lipschitz estimate of the gradient);
    the returned center is the best of {old center, cell mean, descent end}
    by cell cost, which keeps the Lloyd loop monotone.
    """
    k = len(old)
    new = old.copy()
    for c in range(k):
        members = points[labels == c]
        if len(members) == 0:
            continue
        candidates = [old[c], members.mean(axis=0)]
        a = members.mean(axis=0).copy()
        for _ in range(50):
            diff = a[None, :] - members
            d = np.maximum(np.hypot(diff[:, 0], diff[:, 1]), 1e-12)
            w = d ** (r - 2.0)
            grad = r * (w[:, None] * diff).sum(axis=0)
            lipschitz = r * max(r - 1.0, 1.0) * w.sum()
            if lipschitz <= 0.0:
                break
            a = a - (0.5 / lipschitz) * grad
        candidates.append(a)
        costs = []
        for cand in candidates:
            diff = cand[None, :] - members
            costs.append(float((np.hypot(diff[:, 0], diff[:, 1]) ** r).sum()))
        new[c] = candidates[int(np.argmin(costs))]
    return new


def lloyd(
    pool: SamplePool,
    k: int,
    r: float,
    init: Codebook | int,
    max_iters: int = 100,
    tol: float = 1e-9,
    trace: list[float] | None = None,
) -> LloydResult:
    """One Lloyd descent from a codebook or a seeded random init.

    Alternates nearest-point partition (ties to the lowest index) with
    per-cell center updates (mean for r=2, damped descent otherwise).  Empty
    cells are reseeded on the farthest pool points and counted as repairs.
    Stops when the relative distortion improvement drops below tol.
    """
    if k < 1:
        raise BadK(f"codebook size must be >= 1, got {k}")
    if k > pool.n:
        raise BadK(f"codebook size {k} exceeds pool size {pool.n}")
    if r <= 0:
        raise ValueError(f"order exponent must be > 0, got {r}")
    points = pool.points
    if isinstance(init, Codebook):
        centers = np.array(init.points, dtype=np.float64, copy=True)
        if len(centers) != k:
            raise BadK(f"init codebook has {len(centers)} points, expected {k}")
    else:
        rng = np.random.default_rng(init)
        centers = points[rng.choice(pool.n, size=k, replace=False)].copy()

    repairs = 0
    prev = math.inf
    dist = math.inf
    iters = 0
    repair_budget = 3 * k + 10
    while iters < max_iters:
        iters += 1
        labels, dmin2 = _nearest(points, centers)
        dist = float(np.mean(dmin2 ** (r / 2.0)))
        if trace is not None:
            trace.append(dist)
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if len(empties) and repair_budget > 0:
            far = np.argsort(-dmin2, kind="stable")[: len(empties)]
            centers[empties] = points[far]
            repairs += len(empties)
            repair_budget -= len(empties)
            prev = math.inf  # repaired codebook is a fresh descent
            continue
        if math.isfinite(prev) and prev - dist <= tol * abs(prev):
            break
        prev = dist
        if r == 2.0:
            sums_x = np.bincount(labels, weights=points[:, 0], minlength=k)
            sums_y = np.bincount(labels, weights=points[:, 1], minlength=k)
            nonzero = counts > 0
            centers[nonzero, 0] = sums_x[nonzero] / counts[nonzero]
            centers[nonzero, 1] = sums_y[nonzero] / counts[nonzero]
        else:
            centers = _cell_centers_r(points, labels, centers, r)
    cb = Codebook(points=centers, k=k, origin="lloyd")
    return LloydResult(codebook=cb, distortion=dist, iters=iters, repairs=repairs)


def lloyd_best(
    pool: SamplePool,
    k: int,
    r: float,
    seed: int,
    restarts: int = 5,
    max_iters: int = 100,
    tol: float = 1e-9,
) -> LloydResult:
    """Best of several seeded Lloyd descents (ties keep the earliest)."""
    best: LloydResult | None = None
    for attempt in range(restarts):
        init = int(np.random.default_rng((seed, k, attempt)).integers(2**31))
        result = lloyd(pool, k, r, init=init, max_iters=max_iters, tol=tol)
        if best is None or result.distortion < best.distortion:
            best = result
    assert best is not None
    return LloydResult(
        codebook=best.codebook,
        distortion=best.distortion,
        iters=best.iters,
        repairs=best.repairs,
        restarts_used=restarts,
    )


def antichain_codebook(spec: CarpetSpec, antichain: Antichain) -> Codebook:
    """One point per antichain word: the center of its approximate square."""
    centers = np.array([rect(spec, w).center() for w in antichain.words], dtype=np.float64)
    return Codebook(points=centers, k=len(antichain.words), origin=f"antichain({antichain.j})")


def theoretical_proxy(spec: CarpetSpec, consts: SpectralConstants, antichain: Antichain) -> float:
    """Sum of the antichain's weights: the model-side stand-in for e_psi^r."""
    return math.fsum(math.exp(lw) for lw in antichain.log_weights)
