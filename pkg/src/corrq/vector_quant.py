"""Vector quantizers for distributed mean estimation.

n clients each hold a vector of norm at most R and send one quantized
message; the server averages decoded vectors. Three families live here:

* coordinate-wise correlated quantization over [-R, R], with fixed-width
  or variable-length (gamma) index coding;
* the rotated pipeline: a shared randomized Walsh-Hadamard rotation
  spreads energy across coordinates, coordinates are scaled into [-1, 1]
  (clipping the far tail), quantized with the correlated k-level rule,
  and un-rotated server-side;
* baselines: independent stochastic quantization (with or without the
  rotation), ternary quantization with a per-client max scale, and a
  deliberately simplified rotate-then-sign baseline (biased; a stand-in
  for sign-based methods, not a faithful reproduction of any of them).

Quantizer cores are shape-generic over leading batch axes, matching
scalar_quant; the coordinate axis comes before the client axis in kernel
layouts (d, n).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import bitcodec as bc
from .randomness import RandomnessContext
from .scalar_quant import (
    correlated_bits,
    level_cells,
    level_spacing,
    uniform_grid_cells,
)


@dataclass(frozen=True)
class VectorBatch:
    """One vector per client plus the declared norm bound R."""

    vectors: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2 or vectors.size == 0:
            raise ValueError("vectors must be a non-empty (n, d) array")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        norms = np.linalg.norm(vectors, axis=1)
        if norms.max() > self.radius * (1 + 1e-9):
            raise ValueError(
                f"client norm {norms.max():.6g} exceeds radius {self.radius:.6g}"
            )

    @classmethod
    def from_vectors(cls, vectors: np.ndarray) -> "VectorBatch":
        """Batch with the tight radius max_i ||x_i||."""
        vectors = np.asarray(vectors, dtype=np.float64)
        radius = float(np.linalg.norm(vectors, axis=1).max())
        return cls(vectors, radius if radius > 0 else 1.0)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def mean(self) -> np.ndarray:
        """Coordinate-wise mean, pivot-shifted so identical clients give
        back their common vector exactly (see ScalarBatch.mean)."""
        pivot = self.vectors[0]
        devs = self.vectors - pivot
        return pivot + np.array([math.fsum(col) for col in devs.T]) / self.n


def vector_concentration(batch: VectorBatch) -> float:
    """Mean distance to the batch mean, (1/n) sum ||x_i - xbar||_2."""
    dev = batch.vectors - batch.vectors.mean(axis=0)
    return float(np.linalg.norm(dev, axis=1).mean())


@dataclass(frozen=True)
class VectorQuantReport:
    """Everything one quantized round produces.

    per_client holds the server-side decoding of each client's message
    (estimate is their mean); level_indices are the raw per-coordinate
    indices actually transmitted (padded dimension for rotated schemes);
    payloads are the bit-exact serialized payloads, and bits_per_client is
    the wire header plus each payload's true bit length. scales carries
    per-client side values for the schemes that have them.
    """

    scheme: str
    estimate: np.ndarray
    per_client: np.ndarray
    level_indices: np.ndarray
    payloads: tuple[bc.BitStream, ...]
    bits_per_client: np.ndarray
    clip_events: int
    sigma_d_md: float
    scales: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Randomized Hadamard rotation
# ---------------------------------------------------------------------------


def next_pow2(x: int) -> int:
    if x < 1:
        raise ValueError(f"need a positive dimension, got {x}")
    return 1 << (x - 1).bit_length()


def fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis.

    Sylvester (natural) ordering; the last axis length must be a power of
    two. O(m log m) butterflies, vectorized over any leading axes.
    """
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[-1]
    if m & (m - 1):
        raise ValueError(f"last axis must be a power of two, got {m}")
    lead = x.shape[:-1]
    y = x.reshape(-1, m).copy()
    h = 1
    while h < m:
        y = y.reshape(-1, m // (2 * h), 2, h)
        top = y[:, :, 0, :] + y[:, :, 1, :]
        bot = y[:, :, 0, :] - y[:, :, 1, :]
        y[:, :, 0, :] = top
        y[:, :, 1, :] = bot
        y = y.reshape(-1, m)
        h *= 2
    return y.reshape(*lead, m)


@dataclass(frozen=True)
class RotationSpec:
    """A shared rotation W = (1/sqrt(m)) H D on the padded dimension.

    D is the Rademacher diagonal, H the Sylvester-Hadamard matrix. W is
    orthonormal, so the inverse is W^T: rotate then sign-multiply.
    """

    dim: int
    padded_dim: int
    signs: np.ndarray

    def __post_init__(self) -> None:
        if self.padded_dim != next_pow2(self.dim):
            raise ValueError(
                f"padded_dim {self.padded_dim} != next power of two of {self.dim}"
            )
        if self.signs.shape != (self.padded_dim,):
            raise ValueError("signs must have shape (padded_dim,)")
        if not np.all(np.abs(self.signs) == 1):
            raise ValueError("signs must be +-1")


def rotation_for(ctx: RandomnessContext, dim: int) -> RotationSpec:
    """Rotation drawn by a context built at the padded dimension."""
    m = next_pow2(dim)
    if ctx.d != m:
        raise ValueError(
            f"context carries d={ctx.d}, rotated pipeline for dim {dim} needs {m}"
        )
    return RotationSpec(dim=dim, padded_dim=m, signs=np.asarray(ctx.rotation_signs))


def hadamard_rotate(
    vectors: np.ndarray, spec: RotationSpec, inverse: bool = False
) -> np.ndarray:
    """Apply W (or W^T) along the last axis.

    Forward pads dim -> padded_dim with zeros; inverse truncates back.
    forward(inverse(z)) and inverse(forward(x)) are identities to float
    precision.
    """
    v = np.asarray(vectors, dtype=np.float64)
    m = spec.padded_dim
    root = math.sqrt(m)
    if inverse:
        if v.shape[-1] != m:
            raise ValueError(f"inverse rotation expects last axis {m}")
        out = (fwht(v) / root) * spec.signs
        return out[..., : spec.dim]
    if v.shape[-1] != spec.dim:
        raise ValueError(f"forward rotation expects last axis {spec.dim}")
    if spec.dim < m:
        pad = np.zeros(v.shape[:-1] + (m - spec.dim,), dtype=np.float64)
        v = np.concatenate([v, pad], axis=-1)
    return fwht(v * spec.signs) / root


def rotation_scale(radius: float, padded_dim: int, n: int) -> float:
    """Scale mapping rotated coordinates into [-1, 1] up to a rare tail.

    sqrt(m) / (R sqrt(8 ln(m n))): rotated coordinates of a norm-R vector
    are sub-gaussian with deviation R/sqrt(m), so the scaled coordinate
    exceeds 1 with probability at most 2 (m n)^-4.
    """
    mn = padded_dim * n
    if mn < 2:
        raise ValueError("rotated pipeline needs padded_dim * n >= 2")
    return math.sqrt(padded_dim) / (radius * math.sqrt(8.0 * math.log(mn)))


# ---------------------------------------------------------------------------
# Shape-generic correlated core on the (..., d, n) layout
# ---------------------------------------------------------------------------


def cq_encode(y, permutations, offset_units_dn, grid_offsets, k: int):
    """Level indices for normalized values y in [0, 1], layout (..., d, n).

    k = 2 is the one-bit rule (indices are the bits); k >= 3 uses the
    randomized grid given by grid_offsets (..., d).
    """
    if k == 2:
        return correlated_bits(y, permutations, offset_units_dn).astype(np.int64)
    first = np.asarray(grid_offsets)[..., None]
    cell, frac = level_cells(y, first, k)
    bits = correlated_bits(frac, permutations, offset_units_dn)
    return cell + bits


def cq_decode(indices, grid_offsets, k: int):
    """Normalized values for transmitted indices, layout (..., d, n)."""
    if k == 2:
        return indices.astype(np.float64)
    first = np.asarray(grid_offsets)[..., None]
    return first + indices * level_spacing(k)


def _ctx_dn(ctx: RandomnessContext):
    """Context arrays in kernel layout: permutations and units as (d, n)."""
    return ctx.permutations, ctx.offset_units.T, ctx.grid_offsets


# ---------------------------------------------------------------------------
# Payload builders
# ---------------------------------------------------------------------------


def _report(
    scheme: str,
    batch: VectorBatch,
    per_client: np.ndarray,
    indices_nd: np.ndarray,
    payloads: list[bc.BitStream],
    clip_events: int = 0,
    scales: np.ndarray | None = None,
) -> VectorQuantReport:
    bits = np.array([bc.HEADER_BITS + p.length for p in payloads], dtype=np.int64)
    return VectorQuantReport(
        scheme=scheme,
        estimate=per_client.mean(axis=0),
        per_client=per_client,
        level_indices=indices_nd,
        payloads=tuple(payloads),
        bits_per_client=bits,
        clip_events=clip_events,
        sigma_d_md=vector_concentration(batch),
        scales=scales,
    )


def _fixed_payloads(indices_nd: np.ndarray, k: int) -> list[bc.BitStream]:
    return [bc.pack_fixed(row, k) for row in indices_nd]


def _gamma_payloads(indices_nd: np.ndarray, k: int) -> list[bc.BitStream]:
    return [
        bc.elias_gamma_encode_many(bc.zigzag_encode(row, k)) for row in indices_nd
    ]


def append_scale_tail(stream: bc.BitStream, scale: float) -> bc.BitStream:
    """Append a float64 scale (IEEE-754 bits, most significant byte first)."""
    w = bc.BitWriter()
    w.write_bits(stream.bits())
    w.write_uint(int.from_bytes(struct.pack(">d", scale), "big"), 64)
    return w.getvalue()


def split_scale_tail(stream: bc.BitStream) -> tuple[bc.BitStream, float]:
    """Inverse of the scale tail: payload minus 64 bits, and the scale."""
    if stream.length < 64:
        raise bc.MalformedStreamError("payload too short for scale tail", 0)
    reader = bc.BitReader(stream)
    reader.pos = stream.length - 64
    raw = reader.read_uint(64)
    scale = struct.unpack(">d", raw.to_bytes(8, "big"))[0]
    return bc.BitStream.from_bits(stream.bits()[: stream.length - 64]), scale


# ---------------------------------------------------------------------------
# Correlated coordinate-wise quantizers
# ---------------------------------------------------------------------------


def _check_vector_ctx(batch: VectorBatch, ctx: RandomnessContext, d: int) -> None:
    if batch.n != ctx.n:
        raise ValueError(f"batch has {batch.n} clients, context has {ctx.n}")
    if ctx.d != d:
        raise ValueError(f"context carries d={ctx.d}, need {d}")


def _correlated_core(batch: VectorBatch, ctx: RandomnessContext, k: int):
    """Quantize every coordinate over [-R, R]; returns (indices_dn, values_dn)."""
    perms, units, grids = _ctx_dn(ctx)
    y = (batch.vectors.T + batch.radius) / (2 * batch.radius)
    indices = cq_encode(y, perms, units, grids, k)
    values = -batch.radius + 2 * batch.radius * cq_decode(indices, grids, k)
    return indices, values


def correlated_vector_cq(
    batch: VectorBatch, ctx: RandomnessContext, k: int = 2
) -> VectorQuantReport:
    """Coordinate-wise correlated quantization, fixed-width index coding."""
    _check_vector_ctx(batch, ctx, batch.d)
    if k != ctx.k:
        raise ValueError(f"k={k} disagrees with context k={ctx.k}")
    indices, values = _correlated_core(batch, ctx, k)
    indices_nd = indices.T
    scheme = "correlated-1bit" if k == 2 else "correlated-klevel"
    return _report(
        scheme, batch, values.T.copy(), indices_nd, _fixed_payloads(indices_nd, k)
    )


def entropy_cq(
    batch: VectorBatch, ctx: RandomnessContext, k: int
) -> VectorQuantReport:
    """Coordinate-wise correlated quantization with gamma-coded indices.

    Identical estimates to correlated_vector_cq under the same context;
    only the payload coding differs. On ball-bounded data most
    coordinates sit near the middle of [-R, R], so the zig-zag plus gamma
    coding spends close to one bit per coordinate plus a logarithmic
    penalty for the outliers.
    """
    _check_vector_ctx(batch, ctx, batch.d)
    if k != ctx.k:
        raise ValueError(f"k={k} disagrees with context k={ctx.k}")
    indices, values = _correlated_core(batch, ctx, k)
    indices_nd = indices.T
    return _report(
        "entropy-cq", batch, values.T.copy(), indices_nd, _gamma_payloads(indices_nd, k)
    )


def walsh_hadamard_cq(
    batch: VectorBatch, ctx: RandomnessContext, k: int = 2
) -> VectorQuantReport:
    """Rotate, scale into [-1, 1], correlated-quantize, un-rotate.

    The shared rotation flattens every client vector so coordinates are
    uniformly small; the scale picks up a sqrt(log(mn)) safety factor and
    the far tail is clipped (the only bias source, vanishing at rate
    (mn)^-4). Fixed-width payloads over the padded dimension.
    """
    m = next_pow2(batch.d)
    _check_vector_ctx(batch, ctx, m)
    if k != ctx.k:
        raise ValueError(f"k={k} disagrees with context k={ctx.k}")
    spec = rotation_for(ctx, batch.d)
    scale = rotation_scale(batch.radius, m, batch.n)
    rotated = hadamard_rotate(batch.vectors, spec) * scale
    clip_events = int(np.count_nonzero(np.abs(rotated) > 1.0))
    clipped = np.clip(rotated, -1.0, 1.0)

    perms, units, grids = _ctx_dn(ctx)
    y = (clipped.T + 1.0) / 2.0
    indices = cq_encode(y, perms, units, grids, k)
    values = -1.0 + 2.0 * cq_decode(indices, grids, k)

    per_client = hadamard_rotate(values.T / scale, spec, inverse=True)
    indices_nd = indices.T
    return _report(
        "hadamard-cq",
        batch,
        per_client,
        indices_nd,
        _fixed_payloads(indices_nd, k),
        clip_events=clip_events,
    )


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def independent_vector_sq(
    batch: VectorBatch,
    k: int,
    rotate: bool = False,
    rng: np.random.Generator | None = None,
    ctx: RandomnessContext | None = None,
) -> VectorQuantReport:
    """Independent stochastic quantization, optionally inside the rotation.

    Unrotated: each coordinate rounds on the uniform k-level grid over
    [-R, R] with private randomness. Rotated: the shared rotation and
    scale come from ctx (the server must undo them), the rounding stays
    private, and the tail clips exactly as in the correlated pipeline.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if not rotate:
        y = (batch.vectors + batch.radius) / (2 * batch.radius) * (k - 1)
        cell, frac = uniform_grid_cells(y, k)
        indices = cell + (rng.random(y.shape) < frac)
        per_client = -batch.radius + 2 * batch.radius * indices / (k - 1)
        return _report(
            "independent", batch, per_client, indices, _fixed_payloads(indices, k)
        )
    if ctx is None:
        raise ValueError("rotated variant needs the shared rotation context")
    m = next_pow2(batch.d)
    _check_vector_ctx(batch, ctx, m)
    spec = rotation_for(ctx, batch.d)
    scale = rotation_scale(batch.radius, m, batch.n)
    rotated = hadamard_rotate(batch.vectors, spec) * scale
    clip_events = int(np.count_nonzero(np.abs(rotated) > 1.0))
    clipped = np.clip(rotated, -1.0, 1.0)
    y = (clipped + 1.0) / 2.0 * (k - 1)
    cell, frac = uniform_grid_cells(y, k)
    indices = cell + (rng.random(y.shape) < frac)
    values = -1.0 + 2.0 * indices / (k - 1)
    per_client = hadamard_rotate(values / scale, spec, inverse=True)
    return _report(
        "independent-rotation",
        batch,
        per_client,
        indices,
        _fixed_payloads(indices, k),
        clip_events=clip_events,
    )


def ternary_quantize(
    batch: VectorBatch, rng: np.random.Generator
) -> VectorQuantReport:
    """Ternary baseline: coordinates snap to {-s_i, 0, +s_i}.

    s_i = max_j |x_i(j)|; a coordinate fires with probability |x|/s_i and
    carries its sign. Unbiased. An all-zero client sends exact zeros. The
    per-client scale rides along as a float64 payload tail.
    """
    x = batch.vectors
    scales = np.abs(x).max(axis=1)
    safe = np.where(scales > 0, scales, 1.0)
    prob = np.abs(x) / safe[:, None]
    fire = rng.random(x.shape) < prob
    trits = (np.sign(x) * fire).astype(np.int64)
    per_client = trits * scales[:, None]
    indices = trits + 1
    payloads = [
        append_scale_tail(bc.pack_fixed(row, 3), float(s))
        for row, s in zip(indices, scales)
    ]
    return _report(
        "terngrad", batch, per_client.astype(np.float64), indices, payloads,
        scales=scales,
    )


def sign_scale_kernel(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sign bits and the l2-optimal per-client scale ||y||_1 / m.

    sign(0) counts as +1. The scale minimizes ||y - s * sign(y)||_2, so
    the round-trip error never exceeds ||y||_2.
    """
    y = np.asarray(y, dtype=np.float64)
    bits = (y >= 0).astype(np.int64)
    scales = np.abs(y).mean(axis=-1)
    return bits, scales


def rotate_sign_baseline(
    batch: VectorBatch, ctx: RandomnessContext
) -> VectorQuantReport:
    """Simplified rotate-then-sign baseline (biased, deterministic).

    Rotate with the shared W, keep one sign bit per coordinate plus the
    l1 scale, un-rotate. A stand-in for sign-based one-bit schemes; it is
    intentionally not a faithful reproduction of any published method.
    """
    m = next_pow2(batch.d)
    _check_vector_ctx(batch, ctx, m)
    spec = rotation_for(ctx, batch.d)
    rotated = hadamard_rotate(batch.vectors, spec)
    bits, scales = sign_scale_kernel(rotated)
    values = scales[:, None] * (2.0 * bits - 1.0)
    per_client = hadamard_rotate(values, spec, inverse=True)
    payloads = [
        append_scale_tail(bc.pack_fixed(row, 2), float(s))
        for row, s in zip(bits, scales)
    ]
    return _report(
        "rotate-sign", batch, per_client, bits, payloads, scales=scales
    )
