"""Exact finite-alphabet probability tables and information measures.

Everything downstream (channel models, rate regions, the optimizer, the
Monte-Carlo decoder) is built on four table types:

* ``Alphabet`` -- a finite set of letters, indexed ``0..size-1``.
* ``Pmf`` -- a probability vector over one alphabet.
* ``CondPmf`` -- a table of Pmfs indexed by a tuple of conditioning letters.
* ``JointPmf`` -- a dense joint distribution over named axes.

Conventions: all logs are base 2 (rates in bits), ``0 * log 0 == 0``, and
``0/0`` terms inside mutual-information sums contribute 0.  Tables are dense
numpy arrays; the alphabets in this problem domain are tiny (at most a few
letters per axis), so exactness and simplicity beat sparsity.

All values are immutable after construction and every operation is a pure
function, so they may be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PMF_TOL = 1e-12          # normalization tolerance for user-supplied tables
JOINT_TOL = 1e-10        # looser tolerance for joints built from products


class ValidationError(ValueError):
    """A probability table violates one of its invariants."""


_TINY = float(np.finfo(float).tiny)


def xlog2x(a: np.ndarray) -> np.ndarray:
    """Elementwise ``a * log2(a)`` for ``a >= 0``, with ``0 * log 0 == 0``.

    Zeros are clamped to the smallest positive float before the log; the
    product then underflows to exactly 0, realizing the convention without a
    mask allocation (this sits on the optimizer's hot path).
    """
    a = np.asarray(a, dtype=float)
    return a * np.log2(np.maximum(a, _TINY))


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet; letters are the indices ``0..size-1``."""

    size: int

    def __post_init__(self) -> None:
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise ValidationError(f"alphabet size must be a positive integer, got {self.size!r}")


@dataclass(frozen=True)
class Pmf:
    """Probability vector over ``0..len(probs)-1``; entries >= 0, sum to 1."""

    probs: np.ndarray

    def __init__(self, probs: Iterable[float]):
        arr = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("pmf must be a non-empty 1-D vector")
        if np.any(arr < 0):
            i = int(np.argmin(arr))
            raise ValidationError(f"pmf entry {i} is negative: {arr[i]}")
        if abs(arr.sum() - 1.0) > PMF_TOL:
            raise ValidationError(f"pmf sums to {arr.sum()!r}, expected 1 within {PMF_TOL}")
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def size(self) -> int:
        return self.probs.size

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])


@dataclass(frozen=True)
class CondPmf:
    """Conditional table ``P(out | given)``.

    ``table`` has shape ``(*given_sizes, out_size)``; every row (the last
    axis) is a valid Pmf.  An empty ``given_sizes`` tuple degenerates to an
    unconditional Pmf, which keeps factor plumbing uniform.
    """

    table: np.ndarray

    def __init__(self, table, given_sizes: Sequence[int] | None = None):
        arr = np.asarray(table, dtype=float)
        if given_sizes is not None:
            arr = arr.reshape(*given_sizes, -1)
        if arr.ndim < 1:
            raise ValidationError("conditional table must have at least the output axis")
        if np.any(arr < 0):
            idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(arr)), arr.shape))
            raise ValidationError(f"conditional entry {idx} is negative: {float(arr[idx])}")
        sums = arr.sum(axis=-1)
        bad = np.abs(sums - 1.0) > PMF_TOL
        if np.any(bad):
            idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(np.abs(sums - 1.0))), sums.shape))
            raise ValidationError(f"conditional row {idx} sums to {float(sums[idx])}, expected 1")
        arr.flags.writeable = False
        object.__setattr__(self, "table", arr)

    @property
    def given_shape(self) -> tuple[int, ...]:
        return self.table.shape[:-1]

    @property
    def out_size(self) -> int:
        return self.table.shape[-1]

    def row(self, *given: int) -> Pmf:
        return Pmf(self.table[tuple(given)])


@dataclass(frozen=True)
class JointPmf:
    """Dense joint distribution over uniquely named axes."""

    axes: tuple[str, ...]
    probs: np.ndarray = field(repr=False)

    def __init__(self, axes: Sequence[str], probs):
        axes = tuple(axes)
        arr = np.asarray(probs, dtype=float)
        if len(set(axes)) != len(axes):
            raise ValidationError(f"axis names must be unique, got {axes}")
        if arr.ndim != len(axes):
            raise ValidationError(f"{len(axes)} axes declared but table has {arr.ndim} dims")
        if np.any(arr < 0):
            idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(arr)), arr.shape))
            raise ValidationError(f"joint entry {idx} is negative: {float(arr[idx])}")
        if abs(arr.sum() - 1.0) > JOINT_TOL:
            raise ValidationError(f"joint sums to {float(arr.sum())}, expected 1 within {JOINT_TOL}")
        arr.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis_index(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise KeyError(f"unknown axis {name!r}; joint has axes {self.axes}") from None


@dataclass(frozen=True)
class Factor:
    """One factor of a product-form joint: ``P(axis | given)``."""

    axis: str
    table: CondPmf
    given: tuple[str, ...] = ()


def entropy(p: Pmf) -> float:
    """Shannon entropy H(p) in bits."""
    return float(-xlog2x(p.probs).sum())


def binary_entropy(p: float) -> float:
    """H_b(p) = -p log2 p - (1-p) log2 (1-p), for p in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"binary_entropy requires p in [0,1], got {p}")
    return float(-xlog2x(np.array([p, 1.0 - p])).sum())


def bernoulli_convolve(p: float, q: float) -> float:
    """Crossover of the mod-2 sum of Bernoulli(p) and Bernoulli(q)."""
    if not 0.0 <= p <= 1.0 or not 0.0 <= q <= 1.0:
        raise ValidationError(f"bernoulli_convolve requires arguments in [0,1], got {p}, {q}")
    return (1.0 - p) * q + (1.0 - q) * p


def joint_from_factors(factors: Sequence[Factor]) -> JointPmf:
    """Multiply conditional factors into a dense joint.

    Factors are applied in order; every parent axis must already have been
    introduced by an earlier factor (the factor graph is a DAG traversed in
    topological order).  Marginalizing the result back onto any prefix of
    the factor list recovers those factors' joint exactly.
    """
    axes: list[str] = []
    probs: np.ndarray | None = None
    for f in factors:
        if f.axis in axes:
            raise ValidationError(f"axis {f.axis!r} introduced twice")
        for parent in f.given:
            if parent not in axes:
                raise ValidationError(f"factor for {f.axis!r} conditions on undefined axis {parent!r}")
        expected = tuple(dict(zip(axes, probs.shape))[g] for g in f.given) if probs is not None else ()
        if f.table.given_shape != expected:
            raise ValidationError(
                f"factor for {f.axis!r}: conditioning shape {f.table.given_shape} "
                f"does not match parent sizes {expected}"
            )
        # Broadcast the factor table across all existing axes, parents aligned.
        shape = [1] * len(axes) + [f.table.out_size]
        t = f.table.table
        if f.given:
            dst = [axes.index(g) for g in f.given]
            order = sorted(range(len(f.given)), key=lambda i: dst[i])
            t = np.transpose(t, axes=[*order, len(f.given)])
            for i in order:
                shape[dst[i]] = f.table.given_shape[i]
        t = t.reshape(shape)
        probs = t.copy() if probs is None else probs[..., None] * t
        axes.append(f.axis)
    if probs is None:
        raise ValidationError("no factors given")
    return JointPmf(axes, probs)


def marginalize(j: JointPmf, keep: Sequence[str]) -> JointPmf:
    """Sum out all axes not in ``keep``; kept axes stay in original order."""
    keep = tuple(keep)
    for name in keep:
        j.axis_index(name)
    drop = tuple(i for i, a in enumerate(j.axes) if a not in keep)
    kept_axes = tuple(a for a in j.axes if a in keep)
    return JointPmf(kept_axes, j.probs.sum(axis=drop) if drop else j.probs)


def joint_entropy(j: JointPmf, axes: Sequence[str] | None = None) -> float:
    """Entropy in bits of the marginal of ``j`` on ``axes`` (all by default)."""
    if axes is None:
        table = j.probs
    else:
        keep = set(axes)
        drop = tuple(i for i, a in enumerate(j.axes) if a not in keep)
        table = j.probs.sum(axis=drop) if drop else j.probs
    return float(-xlog2x(table).sum())


def conditional_mutual_information(
    j: JointPmf,
    a: Sequence[str],
    b: Sequence[str],
    c: Sequence[str] = (),
) -> float:
    """I(A;B|C) in bits; ``c`` may be empty, giving plain mutual information.

    Computed as H(A,C) + H(B,C) - H(A,B,C) - H(C), which realizes the
    standard 0/0 convention cell by cell.
    """
    a, b, c = tuple(a), tuple(b), tuple(c)
    for group in (a, b, c):
        for name in group:
            j.axis_index(name)
    sets = [set(a), set(b), set(c)]
    if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
        raise ValidationError(f"axis groups must be disjoint: a={a}, b={b}, c={c}")
    if not a or not b:
        raise ValidationError("a and b must be non-empty axis groups")
    h_ac = joint_entropy(j, a + c)
    h_bc = joint_entropy(j, b + c)
    h_abc = joint_entropy(j, a + b + c)
    h_c = joint_entropy(j, c) if c else 0.0
    return h_ac + h_bc - h_abc - h_c
