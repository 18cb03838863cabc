"""Scalar quantizers for distributed mean estimation.

n clients each hold one value in a known range [l, r] and send a quantized
message; the server averages the decoded values to estimate the batch mean.
The correlated quantizers here share randomness across clients (a common
permutation plus per-client sub-cell offsets) so that the aggregate error
scales with how concentrated the batch is, not just with the range. The
independent stochastic quantizer is the classical baseline.

All quantizer cores are shape-generic: inputs may carry arbitrary leading
batch axes (the Monte Carlo harness prepends a trial axis), with clients on
the last axis. The reference single-round ops below are the same kernels
applied to one context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .randomness import RandomnessContext


@dataclass(frozen=True)
class ScalarBatch:
    """One value per client plus the shared bounds.

    Values must lie in the closed interval [lower, upper]; the upper
    endpoint is admissible (clipping pipelines can produce it) and is
    quantized exactly. Degenerate bounds are rejected.
    """

    values: np.ndarray
    lower: float
    upper: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(
                f"need lower < upper, got [{self.lower}, {self.upper}]"
            )
        if values.min() < self.lower or values.max() > self.upper:
            raise ValueError("values outside declared bounds")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def normalized(self) -> np.ndarray:
        """Values mapped to [0, 1]."""
        return (self.values - self.lower) / self.width

    def mean(self) -> float:
        """Batch mean via a pivot-shifted compensated sum.

        Plain float summation of n equal values can land one ulp off the
        common value; anchoring at values[0] makes constant batches (the
        zero-error case) come out exact and is at least as accurate as a
        naive mean everywhere else.
        """
        pivot = float(self.values[0])
        return pivot + math.fsum(self.values - pivot) / self.n


@dataclass(frozen=True)
class ConcentrationStats:
    """Deviation summaries of a batch around its mean.

    sigma_md <= sigma <= sigma_max always (mean absolute deviation, root
    mean square deviation, max deviation).
    """

    sigma_md: float
    sigma: float
    sigma_max: float


def concentration_stats(batch: ScalarBatch) -> ConcentrationStats:
    dev = np.abs(batch.values - batch.mean())
    return ConcentrationStats(
        sigma_md=float(dev.mean()),
        sigma=float(np.sqrt(np.mean(dev**2))),
        sigma_max=float(dev.max()),
    )


def level_spacing(k: int) -> float:
    """Spacing of the randomized k-level grid, (k+1) / (k(k-1))."""
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    return (k + 1) / (k * (k - 1))


@dataclass(frozen=True)
class LevelGrid:
    """Randomized level grid on the normalized range.

    Levels are first_level + m * spacing for m in {0..k-1}, with
    first_level in [-1/k, 0). The top level is always >= 1, so every
    normalized value has a level strictly below it and one at or above it.
    """

    k: int
    first_level: float

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"need k >= 2, got k={self.k}")
        if not (-1.0 / self.k <= self.first_level < 0.0):
            raise ValueError(
                f"first_level {self.first_level} outside [-1/{self.k}, 0)"
            )

    @property
    def spacing(self) -> float:
        return level_spacing(self.k)

    @property
    def levels(self) -> np.ndarray:
        return self.first_level + np.arange(self.k) * self.spacing


def grid_for(ctx: RandomnessContext, coordinate: int = 0) -> LevelGrid:
    """The grid drawn by a context for one coordinate."""
    return LevelGrid(k=ctx.k, first_level=float(ctx.grid_offsets[coordinate]))


@dataclass(frozen=True)
class ScalarQuantOutput:
    """Per-client decoded values, their level indices, and the mean estimate."""

    per_client: np.ndarray
    level_indices: np.ndarray
    estimate: float


# ---------------------------------------------------------------------------
# Shape-generic kernels. Clients on the last axis; any leading batch axes.
# ---------------------------------------------------------------------------


def correlated_bits(
    frac: np.ndarray, permutations: np.ndarray, offset_units: np.ndarray
) -> np.ndarray:
    """Indicator 1{U_i < f_i} with U_i = (pi_i + unit_i) / n.

    Evaluated in the scaled form pi_i + unit_i < n * f_i so that fractions
    of the form s/n compare exactly (the exactness guarantee for batches
    sitting on the estimator's own grid does not hinge on float rounding
    of pi/n + gamma).
    """
    n = permutations.shape[-1]
    return (permutations + offset_units) < n * frac


def level_cells(y: np.ndarray, first_level, k: int):
    """Cell index of the largest level strictly below y, and the fraction.

    Returns (cell, frac): cell in {0..k-2} indexes the level c below y,
    frac = (y - c) / spacing in [0, 1]. A value exactly on a level gets
    frac 1.0, so the indicator fires deterministically and the level is
    reproduced exactly.
    """
    beta = level_spacing(k)
    t = (y - first_level) / beta
    cell = np.clip(np.ceil(t) - 1.0, 0, k - 2).astype(np.int64)
    frac = np.clip((t - cell), 0.0, 1.0)
    return cell, frac


def uniform_grid_cells(y: np.ndarray, k: int):
    """Cell and fraction on the uniform k-level grid over [0, 1].

    y is in grid-step units times (k-1), i.e. normalized values times
    (k-1). The top endpoint lands in the last cell with fraction 1.
    """
    cell = np.clip(np.floor(y), 0, k - 2).astype(np.int64)
    frac = y - cell
    return cell, frac


# ---------------------------------------------------------------------------
# Reference single-round ops.
# ---------------------------------------------------------------------------


def _check_ctx(batch: ScalarBatch, ctx: RandomnessContext, coordinate: int) -> None:
    if batch.n != ctx.n:
        raise ValueError(f"batch has {batch.n} clients, context has {ctx.n}")
    if not 0 <= coordinate < ctx.d:
        raise ValueError(f"coordinate {coordinate} outside context d={ctx.d}")


def one_bit_cq(
    batch: ScalarBatch, ctx: RandomnessContext, coordinate: int = 0
) -> ScalarQuantOutput:
    """Correlated one-bit quantizer.

    Client i sends 1{U_i < y_i} for the shared correlated uniform U_i and
    its normalized value y_i; the decoded value is l + (r-l) * bit. The
    shared permutation turns the n indicator draws into sampling without
    replacement, so the aggregate error tracks the batch's mean absolute
    deviation.
    """
    _check_ctx(batch, ctx, coordinate)
    y = batch.normalized()
    bits = correlated_bits(
        y, ctx.permutations[coordinate], ctx.offset_units[:, coordinate]
    )
    indices = bits.astype(np.int64)
    per_client = batch.lower + batch.width * indices
    return ScalarQuantOutput(
        per_client=per_client,
        level_indices=indices,
        estimate=float(per_client.mean()),
    )


def k_level_cq(
    batch: ScalarBatch,
    ctx: RandomnessContext,
    grid: LevelGrid | None = None,
    coordinate: int = 0,
) -> ScalarQuantOutput:
    """Correlated k-level quantizer on the randomized grid.

    Client i locates the largest level c strictly below its normalized
    value, computes the cell fraction f, and sends the index of
    c + spacing * 1{U_i < f}. Unbiased for every k; the
    deviation-dependent error guarantee kicks in at k >= 3.

    k = 2 delegates to the one-bit quantizer: the randomized two-level
    grid spans 1.5x the range and is strictly dominated by the plain
    one-bit rule, which uses the same single bit.
    """
    _check_ctx(batch, ctx, coordinate)
    if grid is None:
        grid = grid_for(ctx, coordinate)
    if grid.k == 2:
        return one_bit_cq(batch, ctx, coordinate)
    y = batch.normalized()
    cell, frac = level_cells(y, grid.first_level, grid.k)
    bits = correlated_bits(
        frac, ctx.permutations[coordinate], ctx.offset_units[:, coordinate]
    )
    indices = cell + bits
    per_client = batch.lower + batch.width * (
        grid.first_level + indices * grid.spacing
    )
    return ScalarQuantOutput(
        per_client=per_client,
        level_indices=indices,
        estimate=float(per_client.mean()),
    )


def independent_sq(
    batch: ScalarBatch, k: int, rng: np.random.Generator
) -> ScalarQuantOutput:
    """Independent stochastic quantizer on the uniform k-level grid.

    Each client rounds to one of the two enclosing grid points with
    probability proportional to proximity, using private randomness.
    Unbiased; aggregate MSE is bounded by (r-l)^2 / (4 n (k-1)^2)
    regardless of how concentrated the batch is.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    y = batch.normalized() * (k - 1)
    cell, frac = uniform_grid_cells(y, k)
    u = rng.random(batch.n)
    indices = cell + (u < frac)
    per_client = batch.lower + batch.width * indices / (k - 1)
    return ScalarQuantOutput(
        per_client=per_client,
        level_indices=indices,
        estimate=float(per_client.mean()),
    )
