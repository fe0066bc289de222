"""Boundary tracing over auxiliary-policy space.

The capacity regions are convex, so their boundaries are traced exactly (up
to search error) by maximizing weighted sums ``mu1*R1 + mu2*R2`` over many
directions and taking the hull of the winning pentagons.  Each direction is
solved by random-restart projected coordinate ascent on the stacked
conditional-probability tables: one conditioning context's row is perturbed
on the simplex at a time, renormalized, input-weight caps enforced by
scaling mass off the '1' letter, with geometric step decay.

Restarts run in lockstep as a batched tensor computation; the authoritative
pentagon for every reported witness is re-evaluated through
:mod:`macstate.rateregion`, so traced frontiers are achievability-certified
lower bounds.  Reported regions are inner approximations.

Determinism: every random draw derives from ``(cfg.seed, direction index)``;
directions are independent work units and the final reduction is a fixed
order, so results are identical regardless of how many worker threads the
``MACSTATE_THREADS`` environment variable allows.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .macmodel import (
    ONE_WAY_FAMILY,
    AuxPolicy,
    CoopConfig,
    InputConstraint,
    MacChannel,
    assemble_joint,
    build_switch_bsc,
    policy_table_shapes,
    u_cardinality_cap,
    v_cardinality_cap,
    with_constraints,
)
from .probcore import CondPmf, ValidationError, binary_entropy, bernoulli_convolve, xlog2x
from .rateregion import (
    Pentagon,
    RatePoint,
    RateRegion,
    hull_union,
    pentagon_message_only,
    pentagon_one_way,
    pentagon_split,
    pentagon_state_only,
    pentagon_two_way,
)

_STEP0 = 0.4
_STEP_MIN = 1e-8


class InfeasibleError(ValidationError):
    """No feasible policy exists for the requested configuration."""


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the boundary search.

    ``u_card``/``v_card`` choose the auxiliary alphabet sizes (they must stay
    within each setting's cardinality cap, beyond which the region cannot
    grow).  The remaining fields control the weighted-direction sweep and
    the per-direction ascent.
    """

    u_card: int = 2
    v_card: int = 2
    weight_count: int = 65
    restarts: int = 24
    local_steps: int = 400
    step_decay: float = 0.955
    tol: float = 1e-6
    seed: int = 1234

    def __post_init__(self) -> None:
        for name in ("u_card", "v_card", "weight_count", "restarts", "local_steps"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"SearchConfig.{name} must be a positive integer, got {v!r}")
        if not 0.0 < self.step_decay < 1.0:
            raise ValidationError(f"step_decay must be in (0,1), got {self.step_decay}")
        if self.tol <= 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class Witness:
    """A certified frontier contribution: the policy and its pentagon."""

    policy: AuxPolicy
    pentagon: Pentagon
    mu: tuple[float, float]
    value: float


@dataclass(frozen=True)
class BoundaryResult:
    region: RateRegion
    witnesses: tuple[Witness, ...]
    vertex_witnesses: tuple[tuple[RatePoint, Witness], ...]
    diagnostics: dict = field(default_factory=dict)


def chebyshev_directions(count: int) -> list[tuple[float, float]]:
    """Weight directions on [0, 90] degrees, clustered toward the axes."""
    if count == 1:
        return [(np.cos(np.pi / 4), np.sin(np.pi / 4))]
    k = np.arange(count)
    theta = (np.pi / 2) * 0.5 * (1.0 - np.cos(np.pi * k / (count - 1)))
    return [(float(np.cos(t)), float(np.sin(t))) for t in theta]


# ---------------------------------------------------------------------------
# batched policy evaluation
# ---------------------------------------------------------------------------

_AXIS = {"s1": 1, "s2": 2, "u": 3, "v": 4, "x1": 5, "x2": 6, "y": 7}


class _Evaluator:
    """Vectorized pentagon evaluation for a batch of stacked policies.

    Mirrors the per-mode formulas of :mod:`macstate.rateregion` exactly; a
    regression test pins the two paths together.  Policies live in a dict of
    arrays ``name -> (B, n_ctx, out)``.
    """

    def __init__(self, ch: MacChannel, mode: str, coop: CoopConfig, constr: InputConstraint,
                 u_card: int, v_card: int):
        self.ch = ch
        self.mode = mode
        self.coop = coop
        self.constr = constr
        self.nu = u_card
        self.nv = v_card if mode in ("two_way", "split") else 1
        if mode in ONE_WAY_FAMILY:
            self.nv = 1
        shapes = policy_table_shapes(ch, mode, self.nu, self.nv)
        if mode == "message_only":
            shapes = dict(shapes)
            shapes["u_given"] = ((), self.nu)
        self.shapes = {name: (tuple(g), out) for name, (g, out) in shapes.items()}
        self.names = list(self.shapes)
        self.rows = [
            (name, ctx)
            for name, (g, out) in self.shapes.items()
            if out > 1
            for ctx in range(int(np.prod(g, dtype=int)) if g else 1)
        ]
        self.ps = ch.state_table
        self.ps1 = self.ps.sum(axis=1)
        self.kern = ch.kernel.table
        if constr.active1 and ch.x1_size != 2:
            raise ValidationError("weight constraint on encoder 1 needs a binary X1 alphabet")
        if constr.active2 and ch.x2_size != 2:
            raise ValidationError("weight constraint on encoder 2 needs a binary X2 alphabet")

    # -- stack plumbing ------------------------------------------------------

    def empty_stack(self, batch: int) -> dict[str, np.ndarray]:
        out = {}
        for name, (g, k) in self.shapes.items():
            n_ctx = int(np.prod(g, dtype=int)) if g else 1
            out[name] = np.full((batch, n_ctx, k), 1.0 / k)
        return out

    def stack_from_policy(self, pol: AuxPolicy) -> dict[str, np.ndarray]:
        tables = {"u_given": pol.u_given, "x1_given": pol.x1_given, "x2_given": pol.x2_given}
        if pol.v_given is not None:
            tables["v_given"] = pol.v_given
        out = {}
        for name, (g, k) in self.shapes.items():
            t = tables[name].table
            if self.mode == "message_only" and name == "u_given":
                t = t[0]
            out[name] = t.reshape(1, -1, k).copy()
        return out

    def to_policy(self, stack: dict[str, np.ndarray], b: int) -> AuxPolicy:
        proj = {k: v[b : b + 1].copy() for k, v in stack.items()}
        self._project(proj)
        tabs = {}
        for name, (g, k) in self.shapes.items():
            t = proj[name][0].reshape(*g, k)
            if self.mode == "message_only" and name == "u_given":
                t = np.tile(t, (self.ch.s1_size, 1))
            tabs[name] = CondPmf(t / t.sum(axis=-1, keepdims=True))
        return AuxPolicy(
            u_given=tabs["u_given"],
            x1_given=tabs["x1_given"],
            x2_given=tabs["x2_given"],
            v_given=tabs.get("v_given"),
        )

    # -- joint + entropies ----------------------------------------------------

    def _tables(self, stack):
        ch, nu, nv = self.ch, self.nu, self.nv
        b = stack["u_given"].shape[0]
        if self.mode == "message_only":
            u = np.broadcast_to(stack["u_given"].reshape(b, 1, nu), (b, ch.s1_size, nu))
        else:
            u = stack["u_given"].reshape(b, ch.s1_size, nu)
        x1 = stack["x1_given"]
        x2 = stack["x2_given"]
        v = stack.get("v_given")
        return u, v, x1, x2

    @staticmethod
    def _hsum(j: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
        m = j.sum(axis=axes) if axes else j
        return -xlog2x(m).reshape(m.shape[0], -1).sum(axis=1)

    def _u_info(self, u: np.ndarray) -> np.ndarray:
        """Batched link cost of P(u|s1): I(U;S) or I(U;S1|S2) for two_way."""
        j = self.ps[None, :, :, None] * u[:, :, None, :]  # (b, s1, s2, u)
        if self.mode == "two_way":
            return (self._hsum(j, (1,)) + self._hsum(j, (3,))
                    - self._hsum(j, ()) - self._hsum(j, (1, 3)))
        return (self._hsum(j, (1, 2)) + self._hsum(j, (3,)) - self._hsum(j, ()))

    def _v_info(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Batched I(V;S2|S1,U) of P(v|s2,u) under P(s1,s2) P(u|s1)."""
        j = (self.ps[None, :, :, None, None] * u[:, :, None, :, None]
             * v[:, None, :, :, :])  # (b, s1, s2, u, v)
        return (self._hsum(j, (2,)) + self._hsum(j, (4,))
                - self._hsum(j, ()) - self._hsum(j, (2, 4)))

    def _bisect_blend(self, table: np.ndarray, anchor: np.ndarray, info, budget: float) -> np.ndarray:
        """Largest blend of ``table`` toward ``anchor`` meeting the info budget.

        ``info(t)`` must vanish at the anchor and grow with the blend weight
        (mutual information is convex in the conditional with a zero at the
        anchor, so the growth is monotone).
        """
        target = max(budget * (1.0 - 1e-9) - 1e-15, 0.0)
        lo = np.zeros(table.shape[0])
        hi = np.ones(table.shape[0])
        for _ in range(22):
            mid = 0.5 * (lo + hi)
            t = mid[:, None, None] * table + (1.0 - mid[:, None, None]) * anchor
            ok = info(t) <= target
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return lo[:, None, None] * table + (1.0 - lo[:, None, None]) * anchor

    def _info_project(self, stack) -> None:
        """Blend auxiliary tables toward independence until link budgets hold.

        Turns the cooperation-rate feasibility cliff into a wall the ascent
        can slide along: any over-budget proposal is mapped to the nearest
        on-budget mixture with its state-averaged table.
        """
        if self.mode == "message_only":
            return
        budget = self._state_budget()
        u = stack["u_given"].reshape(-1, self.ch.s1_size, self.nu)
        over = self._u_info(u) > budget + 1e-13
        if over.any():
            ub = u[over]
            anchor = np.broadcast_to(
                np.einsum("a,bau->bu", self.ps1, ub)[:, None, :], ub.shape)
            u[over] = self._bisect_blend(ub, anchor, self._u_info, budget)
        if self.mode == "two_way":
            uu = u
            v = stack["v_given"].reshape(-1, self.ch.s2_size * self.nu, self.nv)
            vv = v.reshape(-1, self.ch.s2_size, self.nu, self.nv)
            over = self._v_info(uu, vv) > self.coop.c21 + 1e-13
            if over.any():
                ps2 = self.ps.sum(axis=0)
                vb = vv[over]
                anchor = np.broadcast_to(
                    np.einsum("c,bcuv->buv", ps2, vb)[:, None, :, :], vb.shape)
                ub = uu[over]
                blended = self._bisect_blend(
                    vb.reshape(vb.shape[0], -1, self.nv),
                    anchor.reshape(vb.shape[0], -1, self.nv),
                    lambda t: self._v_info(ub, t.reshape(-1, self.ch.s2_size, self.nu, self.nv)),
                    self.coop.c21,
                )
                vv[over] = blended.reshape(-1, self.ch.s2_size, self.nu, self.nv)

    def _project(self, stack) -> None:
        """Scale '1'-letter mass down so expected input weights meet the caps."""
        self._info_project(stack)
        u, v, x1, x2 = self._tables(stack)
        mode = self.mode
        if self.constr.active1:
            w1 = x1[..., 1]
            if mode in ONE_WAY_FAMILY:
                e1 = np.einsum("a,bau,bau->b", self.ps1, u, w1.reshape(-1, self.ch.s1_size, self.nu))
            elif mode == "two_way":
                vv = v.reshape(-1, self.ch.s2_size, self.nu, self.nv)
                e1 = np.einsum("ac,bau,bcuv,bauv->b", self.ps, u, vv,
                               w1.reshape(-1, self.ch.s1_size, self.nu, self.nv))
            else:  # split
                vv = v.reshape(-1, 1, self.nv)[:, 0, :]
                e1 = np.einsum("a,bau,bv,bauv->b", self.ps1, u, vv,
                               w1.reshape(-1, self.ch.s1_size, self.nu, self.nv))
            scale = np.where(e1 > self.constr.p1, self.constr.p1 / np.maximum(e1, 1e-300), 1.0)
            x1[..., 1] *= scale[:, None]
            x1[..., 0] = 1.0 - x1[..., 1]
        if self.constr.active2:
            w2 = x2[..., 1]
            if mode in ONE_WAY_FAMILY:
                pu = np.einsum("a,bau->bu", self.ps1, u)
                e2 = np.einsum("bu,bu->b", pu, w2.reshape(-1, self.nu))
            elif mode == "two_way":
                vv = v.reshape(-1, self.ch.s2_size, self.nu, self.nv)
                e2 = np.einsum("ac,bau,bcuv,bcuv->b", self.ps, u, vv,
                               w2.reshape(-1, self.ch.s2_size, self.nu, self.nv))
            else:  # split
                vv = v.reshape(-1, 1, self.nv)[:, 0, :]
                pu = np.einsum("a,bau->bu", self.ps1, u)
                e2 = np.einsum("bu,bv,buv->b", pu, vv, w2.reshape(-1, self.nu, self.nv))
            scale = np.where(e2 > self.constr.p2, self.constr.p2 / np.maximum(e2, 1e-300), 1.0)
            x2[..., 1] *= scale[:, None]
            x2[..., 0] = 1.0 - x2[..., 1]

    def _joint(self, stack) -> np.ndarray:
        """J[b, s1, s2, u, v, x1, x2, y] for the (projected) stack."""
        ch, nu, nv = self.ch, self.nu, self.nv
        u, v, x1, x2 = self._tables(stack)
        b = u.shape[0]
        if self.mode in ONE_WAY_FAMILY:
            x1t = x1.reshape(b, ch.s1_size, nu, ch.x1_size)
            x2t = x2.reshape(b, nu, ch.x2_size)
            j = np.einsum("ac,bau,baux,buz,acxzy->bacuxzy", self.ps, u, x1t, x2t, self.kern)
            return j[:, :, :, :, None, :, :, :]
        if self.mode == "two_way":
            vt = v.reshape(b, ch.s2_size, nu, nv)
            x1t = x1.reshape(b, ch.s1_size, nu, nv, ch.x1_size)
            x2t = x2.reshape(b, ch.s2_size, nu, nv, ch.x2_size)
            return np.einsum("ac,bau,bcuv,bauvx,bcuvz,acxzy->bacuvxzy",
                             self.ps, u, vt, x1t, x2t, self.kern)
        vt = v.reshape(b, nv)
        x1t = x1.reshape(b, ch.s1_size, nu, nv, ch.x1_size)
        x2t = x2.reshape(b, nu, nv, ch.x2_size)
        return np.einsum("ac,bau,bv,bauvx,buvz,acxzy->bacuvxzy",
                         self.ps, u, vt, x1t, x2t, self.kern)

    @staticmethod
    def _entropy_fn(j: np.ndarray) -> Callable[[tuple[int, ...]], np.ndarray]:
        cache: dict[tuple[int, ...], np.ndarray] = {}

        def h(axes: tuple[str, ...]) -> np.ndarray:
            key = tuple(sorted(_AXIS[a] for a in axes))
            if key not in cache:
                drop = tuple(i for i in range(1, 8) if i not in key)
                m = j.sum(axis=drop) if drop else j
                cache[key] = -xlog2x(m).reshape(m.shape[0], -1).sum(axis=1)
            return cache[key]

        return h

    def pentagon_arrays(self, stack) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(a1, a2, a12, feasible) over the batch, matching rateregion rules."""
        stack = {k: v.copy() for k, v in stack.items()}
        self._project(stack)
        j = self._joint(stack)
        h = self._entropy_fn(j)
        S = ("s1", "s2")

        def cmi(a, b, c=()):
            return h(a + c) + h(b + c) - h(a + b + c) - (h(c) if c else 0.0)

        mode = self.mode
        if mode in ONE_WAY_FAMILY:
            i_us = cmi(("u",), S)
            i1 = cmi(("x1",), ("y",), ("x2",) + S + ("u",))
            i2 = cmi(("x2",), ("y",), ("x1",) + S + ("u",))
            i12u = cmi(("x1", "x2"), ("y",), S + ("u",))
            i12s = cmi(("x1", "x2"), ("y",), S)
            if mode == "one_way":
                feas = i_us <= self.coop.c12 + 1e-12
                credit = self.coop.c12 - i_us
                a1, a2 = i1 + credit, i2
                a12 = np.minimum(i12u + credit, i12s)
            elif mode == "state_only":
                feas = i_us <= self.coop.c12 + 1e-12
                a1, a2, a12 = i1, i2, i12u
            else:  # message_only; I(U;S) = 0 by construction
                feas = np.ones_like(i_us, dtype=bool)
                a1, a2 = i1 + self.coop.c12, i2
                a12 = np.minimum(i12u + self.coop.c12, i12s)
        elif mode == "two_way":
            i_us = cmi(("u",), ("s1",), ("s2",))
            i_vs = cmi(("v",), ("s2",), ("s1", "u"))
            feas = (i_us <= self.coop.c12 + 1e-12) & (i_vs <= self.coop.c21 + 1e-12)
            cr12 = self.coop.c12 - i_us
            cr21 = self.coop.c21 - i_vs
            cond = S + ("u", "v")
            a1 = cmi(("x1",), ("y",), ("x2",) + cond) + cr12
            a2 = cmi(("x2",), ("y",), ("x1",) + cond) + cr21
            a12 = np.minimum(cmi(("x1", "x2"), ("y",), cond) + cr12 + cr21,
                             cmi(("x1", "x2"), ("y",), S))
        else:  # split
            i_us = cmi(("u",), S)
            feas = i_us <= self.coop.c12s + 1e-12
            cond = S + ("u", "v")
            a1 = cmi(("x1",), ("y",), ("x2",) + cond) + self.coop.c12m
            a2 = cmi(("x2",), ("y",), ("x1",) + cond)
            a12 = np.minimum(cmi(("x1", "x2"), ("y",), cond) + self.coop.c12m,
                             cmi(("x1", "x2"), ("y",), S + ("u",)))
        return np.maximum(a1, 0.0), np.maximum(a2, 0.0), np.maximum(a12, 0.0), feas

    def support(self, stack, mu: tuple[float, float]) -> np.ndarray:
        a1, a2, a12, feas = self.pentagon_arrays(stack)
        s = np.minimum(a12, a1 + a2)
        x = np.minimum(a1, s)
        v1 = mu[0] * x + mu[1] * np.minimum(a2, s - x)
        y = np.minimum(a2, s)
        v2 = mu[0] * np.minimum(a1, s - y) + mu[1] * y
        vals = np.maximum(v1, v2)
        return np.where(feas, vals, -np.inf)

    def authoritative_pentagon(self, pol: AuxPolicy) -> Pentagon:
        j = assemble_joint(self.ch, pol, self.mode)
        if self.mode == "one_way":
            return pentagon_one_way(j, self.coop.c12)
        if self.mode == "state_only":
            return pentagon_state_only(j, self.coop.c12)
        if self.mode == "message_only":
            return pentagon_message_only(j, self.coop.c12)
        if self.mode == "two_way":
            return pentagon_two_way(j, self.coop.c12, self.coop.c21)
        return pentagon_split(j, self.coop.c12m, self.coop.c12s)

    # -- initialization --------------------------------------------------------

    def _state_budget(self) -> float:
        if self.mode == "one_way" or self.mode == "state_only":
            return self.coop.c12
        if self.mode == "two_way":
            return self.coop.c12
        if self.mode == "split":
            return self.coop.c12s
        return 0.0

    def _u_copy_table(self, blend: float) -> np.ndarray:
        """U = S with probability blend, uniform otherwise (letters mod |U|)."""
        s1, nu = self.ch.s1_size, self.nu
        t = np.full((s1, nu), (1.0 - blend) / nu)
        for s in range(s1):
            t[s, s % nu] += blend
        return t

    def _u_state_info(self, table: np.ndarray) -> float:
        """I(U;S) (or I(U;S1|S2) for two_way) induced by P(u|s1)."""
        jsu = self.ps[:, :, None] * table[:, None, :]
        def ent(m):
            return float(-xlog2x(m).sum())
        if self.mode == "two_way":
            return ent(jsu.sum(axis=0)) + ent(jsu.sum(axis=2)) - ent(jsu) - ent(self.ps.sum(axis=0))
        return ent(jsu.sum(axis=(0, 1))) + ent(self.ps) - ent(jsu.reshape(-1, self.nu))

    def _budgeted_copy(self) -> np.ndarray:
        """Noisy state copy whose link cost just fits the state budget."""
        budget = self._state_budget()
        if self._u_state_info(self._u_copy_table(1.0)) <= budget:
            return self._u_copy_table(1.0)
        lo, hi = 0.0, 1.0
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            if self._u_state_info(self._u_copy_table(mid)) <= budget * (1.0 - 1e-9):
                lo = mid
            else:
                hi = mid
        return self._u_copy_table(lo)

    def init_stack(self, batch: int, rng: np.random.Generator,
                   warm: list[dict[str, np.ndarray]] | None = None) -> dict[str, np.ndarray]:
        stack = self.empty_stack(batch)
        slot = 0

        def put(tables: dict[str, np.ndarray]) -> None:
            nonlocal slot
            if slot >= batch:
                return
            for name, t in tables.items():
                stack[name][slot] = t
            slot += 1

        for w in warm or []:  # warm seeds outrank canonical inits
            put({k: v[0] for k, v in w.items()})
        put({})  # uniform baseline
        if self.mode != "message_only" and self.nu > 1:
            # X2 tracking U seeds the state-cooperation optima.
            g2, k2 = self.shapes["x2_given"]
            n2 = int(np.prod(g2, dtype=int)) if g2 else 1
            x2_track = np.full((n2, k2), 1e-6)
            for ctx in range(n2):
                idx = np.unravel_index(ctx, g2) if g2 else ()
                u_letter = idx[1] if self.mode == "two_way" else idx[0]
                x2_track[ctx, u_letter % k2] = 1.0
            x2_track /= x2_track.sum(axis=1, keepdims=True)
            copy_u = self._u_copy_table(1.0).reshape(-1, self.nu)
            budget_u = self._budgeted_copy().reshape(-1, self.nu)
            put({"u_given": copy_u})
            put({"u_given": budget_u})
            put({"u_given": budget_u, "x2_given": x2_track})
            put({"u_given": copy_u, "x2_given": x2_track})
            deg = np.zeros((self.ch.s1_size, self.nu))
            deg[..., 0] = 1.0
            put({"u_given": deg.reshape(-1, self.nu)})
        while slot < batch:
            alpha = 1.0 if slot % 2 == 0 else 0.3
            tables = {}
            for name, (g, k) in self.shapes.items():
                if k == 1:
                    continue
                n_ctx = int(np.prod(g, dtype=int)) if g else 1
                tables[name] = rng.dirichlet(np.full(k, alpha), size=n_ctx)
            if self.mode != "message_only" and self.nu > 1 and slot % 2 == 1:
                # Row-wise random blends of the state copy: asymmetric
                # coordination levels per state letter are where the curved
                # part of the frontier lives.
                lam = rng.random(self.ch.s1_size)
                t = lam[:, None] * self._u_copy_table(1.0) + (1.0 - lam)[:, None] / self.nu
                tables["u_given"] = t.reshape(-1, self.nu)
            put(tables)
        return stack


# ---------------------------------------------------------------------------
# coordinate ascent
# ---------------------------------------------------------------------------

def _coordinate_ascent(ev: _Evaluator, stack, mu, rng, sweeps: int, decay: float) -> np.ndarray:
    """Projected coordinate ascent over table rows, batched two ways.

    Each sweep evaluates every row's perturbation for every restart in one
    batched call (candidate axis = row), then applies, per restart, all rows
    that individually improved.  If the combined move underperforms the best
    single-row move (rows can interact through the weight projection), it
    falls back to that single row, so the objective never decreases.
    """
    batch = stack[ev.names[0]].shape[0]
    n_rows = len(ev.rows)
    vals = ev.support(stack, mu)
    step = _STEP0
    for _ in range(sweeps):
        wide = {k: np.repeat(v[None, ...], n_rows, axis=0).reshape(n_rows * batch, *v.shape[1:])
                for k, v in stack.items()}
        proposals = []
        for r, (name, ctx) in enumerate(ev.rows):
            rows = stack[name][:, ctx, :]
            prop = np.maximum(rows + step * rng.standard_normal(rows.shape), 0.0)
            norm = prop.sum(axis=1, keepdims=True)
            prop = np.where(norm < 1e-12, rows, prop / np.maximum(norm, 1e-12))
            wide[name][r * batch : (r + 1) * batch, ctx, :] = prop
            proposals.append(prop)
        row_vals = ev.support(wide, mu).reshape(n_rows, batch)
        with np.errstate(invalid="ignore"):  # -inf vs -inf when still infeasible
            improving = row_vals - vals[None, :] > 1e-15
        any_improving = improving.any(axis=0)
        if not any_improving.any():
            step *= decay
            if step < _STEP_MIN:
                break
            continue
        saved = {name: stack[name].copy() for name in stack}
        for r, (name, ctx) in enumerate(ev.rows):
            mask = improving[r]
            if mask.any():
                stack[name][mask, ctx, :] = proposals[r][mask]
        combined = ev.support(stack, mu)
        best_row = np.argmax(row_vals, axis=0)
        best_single = row_vals[best_row, np.arange(batch)]
        fallback = any_improving & (combined < best_single)
        if fallback.any():
            for b in np.nonzero(fallback)[0]:
                for name in stack:
                    stack[name][b] = saved[name][b]
                name, ctx = ev.rows[int(best_row[b])]
                stack[name][b, ctx, :] = proposals[int(best_row[b])][b]
        vals = np.where(any_improving, np.where(fallback, best_single, combined), vals)
        step *= decay
        if step < _STEP_MIN:
            break
    return vals


def _compass_probe_set(ev: _Evaluator, stack1, pair_cap: int = 280) -> list[list[tuple]]:
    """Single and paired mass-shift moves for the pattern search.

    Paired probes let the search slide along curved ridges where two rows
    must co-move (e.g. trading state correlation between conditioning
    contexts while a weight projection holds an input budget tight).  Pairs
    are pruned toward the auxiliary tables when the full set would be large.
    """
    shifts = []
    for name, ctx in ev.rows:
        k = stack1[name].shape[2]
        shifts.append([(name, ctx, i, j) for i in range(k) for j in range(k) if i != j])
    probes: list[list[tuple]] = [[s] for group in shifts for s in group]
    n_rows = len(ev.rows)

    def pair_count(row_pairs):
        return sum(len(shifts[a]) * len(shifts[b]) for a, b in row_pairs)

    all_pairs = [(a, b) for a in range(n_rows) for b in range(a + 1, n_rows)]
    aux = {i for i, (name, _) in enumerate(ev.rows) if name in ("u_given", "v_given")}
    for pairs in (all_pairs,
                  [p for p in all_pairs if p[0] in aux or p[1] in aux],
                  [p for p in all_pairs if p[0] in aux and p[1] in aux]):
        if pair_count(pairs) <= pair_cap:
            for a, b in pairs:
                probes.extend([sa, sb] for sa in shifts[a] for sb in shifts[b])
            break
    return probes


def _compass_polish(ev: _Evaluator, stack1, mu, delta0: float = 0.2, delta_min: float = 1e-9,
                    max_evals: int = 200) -> float:
    """Deterministic pattern search on a single policy.

    Probes mass shifts between letter pairs (single rows and row pairs) at a
    shrinking step; shifts preserve the simplex exactly.  Converges tightly
    to the local optimum the stochastic ascent landed near; the eval budget
    bounds worst-case crawling along projection walls.
    """
    val = float(ev.support(stack1, mu)[0])
    probes = _compass_probe_set(ev, stack1)
    if not probes:
        return val
    n = len(probes)
    delta = delta0
    evals = 0
    while delta > delta_min and evals < max_evals:
        improved = True
        while improved and evals < max_evals:
            improved = False
            wide = {k2: np.repeat(v, n, axis=0) for k2, v in stack1.items()}
            for p, moves in enumerate(probes):
                for name, ctx, i, j in moves:
                    row = wide[name][p, ctx, :]
                    shift = min(delta, float(row[j]))
                    row[i] += shift
                    row[j] -= shift
            vals = ev.support(wide, mu)
            evals += 1
            b = int(np.argmax(vals))
            if np.isfinite(vals[b]) and vals[b] > val + 1e-12:
                for name, ctx, i, j in probes[b]:
                    row = stack1[name][0, ctx, :]
                    shift = min(delta, float(row[j]))
                    row[i] += shift
                    row[j] -= shift
                val = float(vals[b])
                improved = True
        delta *= 0.5
    return val


def _check_cards(ch: MacChannel, coop: CoopConfig, cfg: SearchConfig) -> None:
    cap = u_cardinality_cap(ch, coop.mode)
    if cfg.u_card > cap:
        raise ValidationError(f"u_card={cfg.u_card} exceeds the cardinality cap {cap} for {coop.mode}")
    if coop.mode in ("two_way", "split"):
        vcap = v_cardinality_cap(ch, coop.mode, cfg.u_card)
        if cfg.v_card > vcap:
            raise ValidationError(f"v_card={cfg.v_card} exceeds the cardinality cap {vcap}")


def _run_direction(ev: _Evaluator, mu, cfg: SearchConfig, dir_idx: int,
                   warm: list[dict[str, np.ndarray]] | None = None):
    rng = np.random.default_rng([cfg.seed, dir_idx, 101])
    stack = ev.init_stack(cfg.restarts, rng, warm=warm)
    vals = _coordinate_ascent(ev, stack, mu, rng, cfg.local_steps, cfg.step_decay)
    order = np.argsort(vals)
    best = int(order[-1])
    spread = float(vals[order[-1]] - vals[order[0]]) if np.isfinite(vals[order[0]]) else float("inf")
    if not np.isfinite(vals[best]):
        return None, spread
    winner = {k: v[best : best + 1].copy() for k, v in stack.items()}
    _compass_polish(ev, winner, mu)
    return winner, spread


def optimize_weighted(
    ch: MacChannel,
    coop: CoopConfig,
    constr: InputConstraint,
    w: tuple[float, float],
    cfg: SearchConfig,
    _dir_idx: int = 0,
    _warm: list[dict[str, np.ndarray]] | None = None,
) -> tuple[float, AuxPolicy | None]:
    """Maximize ``w[0]*R1 + w[1]*R2`` over the pentagon of some policy.

    Returns the certified support value and the witness policy; ``(-inf,
    None)`` when no feasible policy was found.  Deterministic given the
    config seed.
    """
    mu = (float(w[0]), float(w[1]))
    if mu[0] < 0 or mu[1] < 0 or (mu[0] == 0 and mu[1] == 0):
        raise ValidationError("weights must be nonnegative and not both zero")
    _check_cards(ch, coop, cfg)
    ev = _Evaluator(ch, coop.mode, coop, constr, cfg.u_card, cfg.v_card)
    winner, _ = _run_direction(ev, mu, cfg, _dir_idx, warm=_warm)
    if winner is None:
        return float("-inf"), None
    pol = ev.to_policy(winner, 0)
    pent = ev.authoritative_pentagon(pol)
    if not pent.feasible:
        return float("-inf"), None
    return pent.support(*mu), pol


def trace_boundary(
    ch: MacChannel,
    coop: CoopConfig,
    constr: InputConstraint | None = None,
    cfg: SearchConfig = SearchConfig(),
) -> BoundaryResult:
    """Trace the outer boundary of the mode's region for this channel.

    Runs the weighted-direction sweep, then a deterministic polish pass that
    lets strong directions seed weak ones, and finally takes the hull of all
    certified witness pentagons.
    """
    constr = constr if constr is not None else ch.constraints
    _check_cards(ch, coop, cfg)
    ev = _Evaluator(ch, coop.mode, coop, constr, cfg.u_card, cfg.v_card)
    mus = chebyshev_directions(cfg.weight_count)

    # Two tiers: a coarse subset of directions gets the full stochastic
    # search; the rest are refined from their nearest searched neighbors
    # with the deterministic compass.  Dense directions keep the hull's
    # chord sag below the comparison tolerances at a fraction of the cost.
    full = sorted(set(range(0, len(mus), 3)) | {len(mus) - 1})
    workers = int(os.environ.get("MACSTATE_THREADS", "1"))
    results: dict[int, tuple] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(full))) as ex:
            futs = {ex.submit(_run_direction, ev, mus[d], cfg, d): d for d in full}
            for f, d in futs.items():
                results[d] = f.result()
    else:
        for d in full:
            results[d] = _run_direction(ev, mus[d], cfg, d)

    winners: list[dict[str, np.ndarray] | None] = [None] * len(mus)
    spreads: list[float] = [float("nan")] * len(mus)
    for d in full:
        winners[d], spreads[d] = results[d]
    for d, mu in enumerate(mus):
        if d in results:
            continue
        lo = max(e for e in full if e < d)
        hi = min(e for e in full if e > d)
        best_val, best_seed = float("-inf"), None
        for e in (lo, hi):
            if winners[e] is None:
                continue
            seed = {k: v.copy() for k, v in winners[e].items()}
            v = _compass_polish(ev, seed, mu, max_evals=60)
            if v > best_val:
                best_val, best_seed = v, seed
        winners[d] = best_seed
        spreads[d] = 0.0

    # Certify pass-1 winners.
    pents: list[Pentagon | None] = []
    pols: list[AuxPolicy | None] = []
    for wnr in winners:
        if wnr is None:
            pents.append(None)
            pols.append(None)
            continue
        pol = ev.to_policy(wnr, 0)
        pent = ev.authoritative_pentagon(pol)
        pols.append(pol if pent.feasible else None)
        pents.append(pent if pent.feasible else None)

    # Polish passes: directions that found a better basin donate their
    # winners to directions they beat; donated seeds are refined with the
    # deterministic compass only (a fresh stochastic ascent would jump out
    # of the donated basin).  Iterate until the frontier stops improving.
    for _ in range(4):
        improved_any = False
        for d, mu in enumerate(mus):
            own = pents[d].support(*mu) if pents[d] is not None else float("-inf")
            donor, donor_val = None, own
            for e, pent in enumerate(pents):
                if e == d or pent is None:
                    continue
                v = pent.support(*mu)
                if v > donor_val + 1e-12:
                    donor_val, donor = v, e
            if donor is None:
                continue
            seed = {k: v.copy() for k, v in winners[donor].items()}
            _compass_polish(ev, seed, mu, max_evals=80)
            pol = ev.to_policy(seed, 0)
            pent = ev.authoritative_pentagon(pol)
            if pent.feasible and pent.support(*mu) > own + 1e-12:
                pols[d], pents[d] = pol, pent
                winners[d] = seed
                improved_any = True
        if not improved_any:
            break

    witnesses = tuple(
        Witness(policy=pol, pentagon=pent, mu=mu, value=pent.support(*mu))
        for pol, pent, mu in zip(pols, pents, mus)
        if pol is not None and pent is not None
    )
    diagnostics = {
        "directions": [
            {"mu": mu, "value": (pent.support(*mu) if pent is not None else None),
             "restart_spread": spread}
            for mu, pent, spread in zip(mus, pents, spreads)
        ],
    }
    if not witnesses:
        return BoundaryResult(RateRegion(()), (), (), diagnostics)

    region = hull_union([w.pentagon for w in witnesses])
    vertex_witnesses = []
    for vert in region.boundary:
        holder = max(
            (w for w in witnesses if w.pentagon.contains(vert, 1e-9)),
            key=lambda w: w.pentagon.support(1.0, 1.0),
            default=witnesses[0],
        )
        vertex_witnesses.append((vert, holder))
    return BoundaryResult(region, witnesses, tuple(vertex_witnesses), diagnostics)


def max_equal_rate(
    ch: MacChannel,
    coop: CoopConfig,
    constr: InputConstraint | None = None,
    cfg: SearchConfig = SearchConfig(),
) -> tuple[float, AuxPolicy | None]:
    """Largest r with (r, r) in the traced region, plus the best witness."""
    res = trace_boundary(ch, coop, constr, cfg)
    if res.region.is_empty:
        return 0.0, None
    r = equal_rate_point(res.region)
    best = max(
        res.witnesses,
        key=lambda w: min(w.pentagon.a1, w.pentagon.a2,
                          min(w.pentagon.a12, w.pentagon.a1 + w.pentagon.a2) / 2.0),
        default=None,
    )
    return r, (best.policy if best is not None else None)


def equal_rate_point(region: RateRegion) -> float:
    """Intersection of the frontier with the diagonal R1 = R2."""
    if region.is_empty:
        return 0.0
    b = region.boundary
    if b[0].r2 <= b[0].r1:
        return min(b[0].r1, b[0].r2)
    for a, c in zip(b[:-1], b[1:]):
        if c.r2 <= c.r1:  # diagonal crosses inside this segment
            dx, dy = c.r1 - a.r1, c.r2 - a.r2
            denom = dx - dy
            if abs(denom) < 1e-15:
                return min(c.r1, c.r2)
            t = (a.r2 - a.r1) / denom
            t = min(1.0, max(0.0, t))
            return a.r1 + t * dx
    return min(b[-1].r1, b[-1].r2)


# ---------------------------------------------------------------------------
# specialized closed-form path for the switch example (cross-validation)
# ---------------------------------------------------------------------------

def closed_form_r1_discrepancy(pz: float, p1: float) -> dict[str, float]:
    """Both candidate R1-bound terms for the switch example.

    ``printed`` keeps the encoder-1 weight spread over the whole block;
    ``concentrated`` lets encoder 1 spend its whole budget on the slots it
    actually controls (half of them), capping the on-slot rate at 1/2.  The
    general boundary tracer is the arbiter between the two; see the
    acceptance suite.
    """
    printed = 0.5 * (binary_entropy(bernoulli_convolve(p1, pz)) - binary_entropy(pz))
    lvl = min(2.0 * p1, 0.5)
    concentrated = 0.5 * (binary_entropy(bernoulli_convolve(lvl, pz)) - binary_entropy(pz))
    return {"printed": printed, "concentrated": concentrated,
            "difference": concentrated - printed}


def closed_form_example_region(
    pz: float,
    p1: float | None,
    p2: float | None,
    c12: float,
    cfg: SearchConfig = SearchConfig(),
) -> RateRegion:
    """Switch-example region from the specialized scalar formulas.

    Optimizes only over P(u|s) and P(x2|u) with binary U; encoder 1's term
    uses the concentrated-weight form (see
    :func:`closed_form_r1_discrepancy`).  Serves as an independent
    cross-check of the general tracer.
    """
    hb_pz = binary_entropy(pz)
    lvl1 = min(2.0 * (p1 if p1 is not None else 0.5), 0.5)
    a1_term = 0.5 * (binary_entropy(bernoulli_convolve(lvl1, pz)) - hb_pz)
    p2_cap = p2 if p2 is not None else 1.0

    def hb(arr: np.ndarray) -> np.ndarray:
        return -(xlog2x(arr) + xlog2x(1.0 - arr))

    def pentagons(params: np.ndarray):
        """params[:, 0:2] = P(U=1|S=s); params[:, 2:4] = P(X2=1|U=u)."""
        alpha = params[:, 0:2]
        beta = params[:, 2:4].copy()
        pu1 = alpha.mean(axis=1)
        # project onto the weight cap: E[X2] = (1-pu1) b0 + pu1 b1
        e2 = (1.0 - pu1) * beta[:, 0] + pu1 * beta[:, 1]
        scale = np.where(e2 > p2_cap, p2_cap / np.maximum(e2, 1e-300), 1.0)
        beta *= scale[:, None]
        i_us = hb(pu1) - 0.5 * hb(alpha[:, 0]) - 0.5 * hb(alpha[:, 1])
        conv = beta * (1.0 - 2.0 * pz) + pz
        hb_conv = hb(conv)
        a2 = 0.5 * ((1.0 - alpha[:, 1]) * hb_conv[:, 0] + alpha[:, 1] * hb_conv[:, 1] - hb_pz)
        beta_bar = (1.0 - alpha[:, 1]) * beta[:, 0] + alpha[:, 1] * beta[:, 1]
        a12 = a1_term + 0.5 * (hb(beta_bar * (1.0 - 2.0 * pz) + pz) - hb_pz)
        feas = i_us <= c12 + 1e-12
        a1 = a1_term + c12 - i_us
        z = np.zeros_like(a1)
        return np.maximum(a1, z), np.maximum(a2, z), np.maximum(a12, z), feas

    def support(params, mu):
        a1, a2, a12, feas = pentagons(params)
        s = np.minimum(a12, a1 + a2)
        x = np.minimum(a1, s)
        v1 = mu[0] * x + mu[1] * np.minimum(a2, s - x)
        y = np.minimum(a2, s)
        v2 = mu[0] * np.minimum(a1, s - y) + mu[1] * y
        return np.where(feas, np.maximum(v1, v2), -np.inf)

    mus = chebyshev_directions(cfg.weight_count)
    best_pents: list[Pentagon] = []
    for d, mu in enumerate(mus):
        rng = np.random.default_rng([cfg.seed, d, 303])
        batch = cfg.restarts
        params = rng.random((batch, 4))
        params[0] = [0.5, 0.5, 0.5, 0.5]
        if batch > 1:
            params[1] = [0.0, 1.0, 0.0, min(1.0, 2 * p2_cap)]  # near state-copy
        if batch > 2:
            params[2] = [0.5, 0.5, p2_cap, p2_cap]
        vals = support(params, mu)
        step = _STEP0
        for _ in range(cfg.local_steps):
            for coord in range(4):
                prop = params.copy()
                prop[:, coord] = np.clip(prop[:, coord] + step * rng.standard_normal(batch), 0.0, 1.0)
                new_vals = support(prop, mu)
                keep = new_vals > vals + 1e-15
                params = np.where(keep[:, None], prop, params)
                vals = np.where(keep, new_vals, vals)
            step *= cfg.step_decay
            if step < _STEP_MIN:
                break
        b = int(np.argmax(vals))
        if np.isfinite(vals[b]):
            a1, a2, a12, feas = pentagons(params[b : b + 1])
            if feas[0]:
                best_pents.append(Pentagon(float(a1[0]), float(a2[0]), float(a12[0])))
    return hull_union(best_pents)


def example_channel(pz: float, p1: float | None, p2: float | None) -> MacChannel:
    """The weight-constrained switch channel used throughout the comparisons."""
    return with_constraints(build_switch_bsc(pz), InputConstraint(p1, p2))
