"""State-dependent MAC models, cooperation configs, and joint assembly.

A channel is the pair (state distribution, kernel): states ``(S1, S2)`` are
drawn i.i.d. from ``state_pmf`` and the output obeys ``P(y | x1, x2, s1, s2)``.
One-way settings are represented with ``S2`` degenerate (``|S2| = 1``) so all
five cooperation modes share a single joint-assembly path:

* ``one_way``      -- P(s) P(u|s) P(x1|s,u) P(x2|u)
* ``state_only``   -- same factorization; the region later pins the link
                      budget to pure state sharing
* ``message_only`` -- same factorization with U independent of S
* ``two_way``      -- P(s1,s2) P(u|s1) P(v|s2,u) P(x1|s1,u,v) P(x2|s2,u,v)
* ``split``        -- P(s) P(u|s) P(v) P(x1|s,u,v) P(x2|u,v)

The assembled joint always carries axes ``(s1, s2, u[, v], x1, x2, y)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .probcore import (
    CondPmf,
    Factor,
    JointPmf,
    Pmf,
    ValidationError,
    conditional_mutual_information,
    joint_from_factors,
    marginalize,
)

MODES = ("one_way", "two_way", "split", "state_only", "message_only")
ONE_WAY_FAMILY = ("one_way", "state_only", "message_only")

AXES_NO_V = ("s1", "s2", "u", "x1", "x2", "y")
AXES_WITH_V = ("s1", "s2", "u", "v", "x1", "x2", "y")


class StructureMismatch(ValidationError):
    """Policy tables do not match the factorization of the requested mode."""


@dataclass(frozen=True)
class InputConstraint:
    """Per-encoder cap on the expected fraction of '1' inputs.

    ``None`` means the encoder is unconstrained.  Only meaningful for binary
    input alphabets, matching the weight-limited example channel.
    """

    p1: float | None = None
    p2: float | None = None

    def __post_init__(self) -> None:
        for name, v in (("p1", self.p1), ("p2", self.p2)):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"constraint {name} must lie in [0,1], got {v}")

    @property
    def active1(self) -> bool:
        return self.p1 is not None and self.p1 < 1.0

    @property
    def active2(self) -> bool:
        return self.p2 is not None and self.p2 < 1.0


@dataclass(frozen=True)
class CoopConfig:
    """Cooperation mode plus the link rates it uses (bits per channel use)."""

    mode: str
    c12: float = 0.0
    c21: float = 0.0
    c12m: float = 0.0
    c12s: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"unknown cooperation mode {self.mode!r}; expected one of {MODES}")
        for name in ("c12", "c21", "c12m", "c12s"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"cooperation rate {name} must be finite and >= 0, got {v}")
        if self.mode != "two_way" and self.c21 != 0.0:
            raise ValidationError("c21 is only meaningful in two_way mode")
        if self.mode != "split" and (self.c12m != 0.0 or self.c12s != 0.0):
            raise ValidationError("c12m/c12s are only meaningful in split mode")
        if self.mode == "split" and self.c12 != 0.0:
            raise ValidationError("split mode uses c12m/c12s, not c12")


@dataclass(frozen=True)
class MacChannel:
    """Finite state-dependent MAC with optional input-weight constraints.

    ``state_pmf`` is over flattened (s1, s2) pairs, lexicographic in
    (s1, s2).  ``kernel`` is P(y | s1, s2, x1, x2) with conditioning shape
    (s1_size, s2_size, x1_size, x2_size).
    """

    s1_size: int
    s2_size: int
    x1_size: int
    x2_size: int
    y_size: int
    state_pmf: Pmf
    kernel: CondPmf
    constraints: InputConstraint = InputConstraint()

    def __post_init__(self) -> None:
        validate_channel(self)

    @property
    def state_table(self) -> np.ndarray:
        """State probabilities as an (s1_size, s2_size) matrix."""
        return self.state_pmf.probs.reshape(self.s1_size, self.s2_size)


def validate_channel(ch: MacChannel) -> None:
    """Check all channel invariants; raises naming the first violation."""
    for name in ("s1_size", "s2_size", "x1_size", "x2_size", "y_size"):
        v = getattr(ch, name)
        if not isinstance(v, (int, np.integer)) or v < 1:
            raise ValidationError(f"{name} must be a positive integer, got {v!r}")
    if ch.state_pmf.size != ch.s1_size * ch.s2_size:
        raise ValidationError(
            f"state_pmf has {ch.state_pmf.size} entries, expected "
            f"s1_size*s2_size = {ch.s1_size * ch.s2_size}"
        )
    expected = (ch.s1_size, ch.s2_size, ch.x1_size, ch.x2_size)
    if ch.kernel.given_shape != expected:
        raise ValidationError(
            f"kernel conditioning shape {ch.kernel.given_shape} does not match "
            f"(s1,s2,x1,x2) = {expected}"
        )
    if ch.kernel.out_size != ch.y_size:
        raise ValidationError(f"kernel output size {ch.kernel.out_size} != y_size {ch.y_size}")
    # Pmf/CondPmf constructors already vetted row normalization and signs.


def build_switch_bsc(pz: float) -> MacChannel:
    """The switch channel: S selects which binary input passes a BSC(pz).

    S ~ Bernoulli(1/2); when S = 0 the output is X1 xor Z, when S = 1 it is
    X2 xor Z, with Z ~ Bernoulli(pz).  S2 is degenerate.
    """
    if not 0.0 <= pz <= 1.0:
        raise ValidationError(f"pz must lie in [0,1], got {pz}")
    kern = np.zeros((2, 1, 2, 2, 2))
    for s in range(2):
        for x1 in range(2):
            for x2 in range(2):
                through = x1 if s == 0 else x2
                kern[s, 0, x1, x2, through] = 1.0 - pz
                kern[s, 0, x1, x2, 1 - through] = pz
    return MacChannel(
        s1_size=2,
        s2_size=1,
        x1_size=2,
        x2_size=2,
        y_size=2,
        state_pmf=Pmf([0.5, 0.5]),
        kernel=CondPmf(kern),
    )


@dataclass(frozen=True)
class AuxPolicy:
    """The free optimization variables: conditional tables for U, V, X1, X2.

    Expected conditioning structure per mode:

    ==============  =============  ================  ==================  ================
    mode            u_given        v_given           x1_given            x2_given
    ==============  =============  ================  ==================  ================
    one-way family  (s1 -> u)      absent            (s1, u -> x1)       (u -> x2)
    two_way         (s1 -> u)      (s2, u -> v)      (s1, u, v -> x1)    (s2, u, v -> x2)
    split           (s1 -> u)      (() -> v)         (s1, u, v -> x1)    (u, v -> x2)
    ==============  =============  ================  ==================  ================
    """

    u_given: CondPmf
    x1_given: CondPmf
    x2_given: CondPmf
    v_given: CondPmf | None = None

    @property
    def u_size(self) -> int:
        return self.u_given.out_size

    @property
    def v_size(self) -> int:
        return self.v_given.out_size if self.v_given is not None else 1


def u_cardinality_cap(ch: MacChannel, mode: str) -> int:
    """Alphabet bound for U beyond which the region cannot grow."""
    s = ch.s1_size * ch.s2_size
    if mode in ONE_WAY_FAMILY:
        return min(ch.x1_size * ch.x2_size * s + 3, ch.y_size * s + 4)
    if mode == "two_way":
        return min(ch.x1_size * ch.x2_size * s + 4, ch.y_size * s + 5)
    if mode == "split":
        return s + 4
    raise ValidationError(f"unknown mode {mode!r}")


def v_cardinality_cap(ch: MacChannel, mode: str, u_size: int) -> int:
    """Alphabet bound for V (two_way / split modes)."""
    s = ch.s1_size * ch.s2_size
    if mode in ("two_way", "split"):
        return min(ch.x1_size * ch.x2_size * s * u_size + 3, ch.y_size * s * u_size + 4)
    raise ValidationError(f"mode {mode!r} has no auxiliary V")


def _check_shape(name: str, got: tuple[int, ...], want: tuple[int, ...]) -> None:
    if got != want:
        raise StructureMismatch(f"{name} conditioning shape {got} does not match expected {want}")


def assemble_joint(ch: MacChannel, pol: AuxPolicy, mode: str) -> JointPmf:
    """Build the full joint over (s1, s2, u[, v], x1, x2, y) for ``mode``."""
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    nu = pol.u_size
    if nu > u_cardinality_cap(ch, mode):
        raise ValidationError(
            f"|U| = {nu} exceeds the cardinality cap {u_cardinality_cap(ch, mode)} for {mode}"
        )

    st = ch.state_table
    ps1 = st.sum(axis=1)
    # Chain split P(s1,s2) = P(s1) P(s2|s1); degenerate rows fall back to uniform.
    with np.errstate(invalid="ignore", divide="ignore"):
        ps2_given = np.where(ps1[:, None] > 0, st / np.where(ps1[:, None] > 0, ps1[:, None], 1.0),
                             1.0 / ch.s2_size)
    factors = [
        Factor("s1", CondPmf(ps1)),
        Factor("s2", CondPmf(ps2_given), ("s1",)),
    ]

    _check_shape("u_given", pol.u_given.given_shape, (ch.s1_size,))
    factors.append(Factor("u", pol.u_given, ("s1",)))

    if mode in ONE_WAY_FAMILY:
        if pol.v_given is not None:
            raise StructureMismatch(f"v_given present in {mode} mode")
        if mode == "message_only":
            rows = pol.u_given.table
            if np.max(np.abs(rows - rows[0])) > 1e-12:
                raise StructureMismatch("message_only requires U independent of S (identical u_given rows)")
        _check_shape("x1_given", pol.x1_given.given_shape, (ch.s1_size, nu))
        _check_shape("x2_given", pol.x2_given.given_shape, (nu,))
        factors.append(Factor("x1", pol.x1_given, ("s1", "u")))
        factors.append(Factor("x2", pol.x2_given, ("u",)))
    elif mode == "two_way":
        if pol.v_given is None:
            raise StructureMismatch("two_way mode requires v_given")
        nv = pol.v_size
        if nv > v_cardinality_cap(ch, mode, nu):
            raise ValidationError(f"|V| = {nv} exceeds the cardinality cap for two_way")
        _check_shape("v_given", pol.v_given.given_shape, (ch.s2_size, nu))
        _check_shape("x1_given", pol.x1_given.given_shape, (ch.s1_size, nu, nv))
        _check_shape("x2_given", pol.x2_given.given_shape, (ch.s2_size, nu, nv))
        factors.append(Factor("v", pol.v_given, ("s2", "u")))
        factors.append(Factor("x1", pol.x1_given, ("s1", "u", "v")))
        factors.append(Factor("x2", pol.x2_given, ("s2", "u", "v")))
    else:  # split
        if pol.v_given is None:
            raise StructureMismatch("split mode requires v_given")
        nv = pol.v_size
        if nv > v_cardinality_cap(ch, mode, nu):
            raise ValidationError(f"|V| = {nv} exceeds the cardinality cap for split")
        _check_shape("v_given", pol.v_given.given_shape, ())
        _check_shape("x1_given", pol.x1_given.given_shape, (ch.s1_size, nu, nv))
        _check_shape("x2_given", pol.x2_given.given_shape, (nu, nv))
        factors.append(Factor("v", pol.v_given, ()))
        factors.append(Factor("x1", pol.x1_given, ("s1", "u", "v")))
        factors.append(Factor("x2", pol.x2_given, ("u", "v")))

    factors.append(Factor("y", ch.kernel, ("s1", "s2", "x1", "x2")))
    return joint_from_factors(factors)


def expected_weight(pol: AuxPolicy, ch: MacChannel, encoder: int, mode: str = "one_way") -> float:
    """P(X_encoder = 1) under the assembled joint; binary inputs only."""
    if encoder not in (1, 2):
        raise ValidationError(f"encoder must be 1 or 2, got {encoder}")
    size = ch.x1_size if encoder == 1 else ch.x2_size
    if size != 2:
        raise ValidationError(f"weight constraint needs a binary input alphabet, X{encoder} has {size} letters")
    j = assemble_joint(ch, pol, mode)
    axis = "x1" if encoder == 1 else "x2"
    return float(marginalize(j, [axis]).probs[1])


def coop_state_info_cost(j: JointPmf, mode: str) -> float:
    """The state-coordination rate the cooperation link must carry.

    One-way family and split: I(U;S).  Two-way (forward link): I(U;S1|S2).
    """
    if mode == "two_way":
        return conditional_mutual_information(j, ["u"], ["s1"], ["s2"])
    return conditional_mutual_information(j, ["u"], ["s1", "s2"])


def _uniform(shape: tuple[int, ...], out: int) -> CondPmf:
    return CondPmf(np.full(shape + (out,), 1.0 / out))


def _normalized(rng: np.random.Generator, shape: tuple[int, ...], out: int) -> CondPmf:
    t = rng.random(shape + (out,)) + 1e-3
    t /= t.sum(axis=-1, keepdims=True)
    return CondPmf(t)


def policy_table_shapes(ch: MacChannel, mode: str, u_size: int, v_size: int = 1):
    """(conditioning shape, output size) for each table of ``mode``."""
    if mode in ONE_WAY_FAMILY:
        return {
            "u_given": ((ch.s1_size,), u_size),
            "x1_given": ((ch.s1_size, u_size), ch.x1_size),
            "x2_given": ((u_size,), ch.x2_size),
        }
    if mode == "two_way":
        return {
            "u_given": ((ch.s1_size,), u_size),
            "v_given": ((ch.s2_size, u_size), v_size),
            "x1_given": ((ch.s1_size, u_size, v_size), ch.x1_size),
            "x2_given": ((ch.s2_size, u_size, v_size), ch.x2_size),
        }
    if mode == "split":
        return {
            "u_given": ((ch.s1_size,), u_size),
            "v_given": ((), v_size),
            "x1_given": ((ch.s1_size, u_size, v_size), ch.x1_size),
            "x2_given": ((u_size, v_size), ch.x2_size),
        }
    raise ValidationError(f"unknown mode {mode!r}")


def uniform_policy(ch: MacChannel, mode: str, u_size: int = 1, v_size: int = 1) -> AuxPolicy:
    """All tables uniform; the canonical no-cooperation baseline."""
    shapes = policy_table_shapes(ch, mode, u_size, v_size)
    tables = {name: _uniform(shape, out) for name, (shape, out) in shapes.items()}
    return AuxPolicy(
        u_given=tables["u_given"],
        x1_given=tables["x1_given"],
        x2_given=tables["x2_given"],
        v_given=tables.get("v_given"),
    )


def random_policy(
    ch: MacChannel, mode: str, u_size: int, v_size: int = 1, rng: np.random.Generator | None = None
) -> AuxPolicy:
    """Random valid policy for ``mode``; message_only ties u rows together."""
    rng = rng if rng is not None else np.random.default_rng()
    shapes = policy_table_shapes(ch, mode, u_size, v_size)
    tables = {name: _normalized(rng, shape, out) for name, (shape, out) in shapes.items()}
    if mode == "message_only":
        row = tables["u_given"].table[0]
        tables["u_given"] = CondPmf(np.tile(row, (ch.s1_size, 1)))
    return AuxPolicy(
        u_given=tables["u_given"],
        x1_given=tables["x1_given"],
        x2_given=tables["x2_given"],
        v_given=tables.get("v_given"),
    )


# ---------------------------------------------------------------------------
# channel spec files
# ---------------------------------------------------------------------------

def channel_from_dict(d: dict) -> MacChannel:
    """Build a channel from the JSON spec schema.

    Schema: ``{"s1_size", "s2_size", "x1_size", "x2_size", "y_size",
    "state_pmf": [...], "kernel": [[...]], "constraints": {"p1", "p2"}}``
    with kernel rows ordered lexicographically in (s1, s2, x1, x2).
    A ``{"preset": "switch_bsc", "pz": ..}`` form bypasses the kernel.
    """
    if d.get("preset") == "switch_bsc":
        ch = build_switch_bsc(float(d.get("pz", 0.01)))
        c = d.get("constraints", {})
        if c:
            return with_constraints(ch, InputConstraint(c.get("p1"), c.get("p2")))
        return ch
    try:
        sizes = {k: int(d[k]) for k in ("s1_size", "s2_size", "x1_size", "x2_size", "y_size")}
    except KeyError as e:
        raise ValidationError(f"channel spec missing field {e.args[0]!r}") from None
    if "state_pmf" not in d:
        raise ValidationError("channel spec missing field 'state_pmf'")
    if "kernel" not in d:
        raise ValidationError("channel spec missing field 'kernel'")
    rows = np.asarray(d["kernel"], dtype=float)
    n_ctx = sizes["s1_size"] * sizes["s2_size"] * sizes["x1_size"] * sizes["x2_size"]
    if rows.shape != (n_ctx, sizes["y_size"]):
        raise ValidationError(
            f"kernel must be {n_ctx} rows of {sizes['y_size']} entries "
            f"(lexicographic in (s1,s2,x1,x2)), got shape {rows.shape}"
        )
    kernel = CondPmf(
        rows.reshape(sizes["s1_size"], sizes["s2_size"], sizes["x1_size"], sizes["x2_size"], sizes["y_size"])
    )
    c = d.get("constraints", {})
    return MacChannel(
        s1_size=sizes["s1_size"],
        s2_size=sizes["s2_size"],
        x1_size=sizes["x1_size"],
        x2_size=sizes["x2_size"],
        y_size=sizes["y_size"],
        state_pmf=Pmf(d["state_pmf"]),
        kernel=kernel,
        constraints=InputConstraint(c.get("p1"), c.get("p2")),
    )


def load_channel(path: str | Path) -> MacChannel:
    with open(path) as fh:
        return channel_from_dict(json.load(fh))


def with_constraints(ch: MacChannel, constraints: InputConstraint) -> MacChannel:
    return MacChannel(
        s1_size=ch.s1_size,
        s2_size=ch.s2_size,
        x1_size=ch.x1_size,
        x2_size=ch.x2_size,
        y_size=ch.y_size,
        state_pmf=ch.state_pmf,
        kernel=ch.kernel,
        constraints=constraints,
    )
