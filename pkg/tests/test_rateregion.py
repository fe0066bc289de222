import numpy as np
import pytest

from macstate.macmodel import (
    AuxPolicy,
    MacChannel,
    assemble_joint,
    build_switch_bsc,
    random_policy,
    uniform_policy,
)
from macstate.probcore import CondPmf, Pmf, ValidationError
from macstate.rateregion import (
    Pentagon,
    RatePoint,
    RateRegion,
    WrongModeJoint,
    directed_hausdorff,
    frontier_is_concave,
    hausdorff_distance,
    hull_union,
    pentagon_message_only,
    pentagon_one_way,
    pentagon_split,
    pentagon_state_only,
    pentagon_two_way,
    point_region_distance,
    region_compare,
    region_contains,
    region_to_csv,
)


def one_way_policy_as_two_way(pol: AuxPolicy) -> AuxPolicy:
    """Embed a one-way policy in the two-way parameterization (|V|=1, |S2|=1)."""
    nu = pol.u_size
    return AuxPolicy(
        u_given=pol.u_given,
        v_given=CondPmf(np.ones((1, nu, 1))),
        x1_given=CondPmf(pol.x1_given.table.reshape(-1, nu, 1, pol.x1_given.out_size)),
        x2_given=CondPmf(pol.x2_given.table.reshape(1, nu, 1, pol.x2_given.out_size)),
    )


def state_copy_policy(ch):
    """U = S exactly; inputs uniform."""
    eye = np.eye(ch.s1_size)
    return AuxPolicy(
        u_given=CondPmf(eye),
        x1_given=CondPmf(np.full((ch.s1_size, ch.s1_size, ch.x1_size), 1.0 / ch.x1_size)),
        x2_given=CondPmf(np.full((ch.s1_size, ch.x2_size), 1.0 / ch.x2_size)),
    )


# ---------------------------------------------------------------------------
# pentagon rules
# ---------------------------------------------------------------------------

def test_one_way_clean_switch_uniform():
    ch = build_switch_bsc(0.0)
    j = assemble_joint(ch, uniform_policy(ch, "one_way", 1), "one_way")
    p = pentagon_one_way(j, 0.0)
    assert p.feasible
    assert p.a1 == pytest.approx(0.5, abs=1e-10)
    assert p.a2 == pytest.approx(0.5, abs=1e-10)
    assert p.a12 == pytest.approx(1.0, abs=1e-10)


def test_one_way_infeasible_when_link_too_small():
    ch = build_switch_bsc(0.01)
    j = assemble_joint(ch, state_copy_policy(ch), "one_way")
    # I(U;S) = H(S) = 1 bit > c12 = 0
    assert not pentagon_one_way(j, 0.0).feasible
    assert pentagon_one_way(j, 1.0).feasible


def test_one_way_case1_degenerate_x1():
    # Channel ignores X1: the R1 bound collapses onto the link credit.
    rng = np.random.default_rng(8)
    kern = rng.random((2, 1, 1, 2, 2)) + 0.05
    kern /= kern.sum(axis=-1, keepdims=True)
    ch = MacChannel(2, 1, 1, 2, 2, Pmf([0.5, 0.5]), CondPmf(kern))
    for seed in range(4):
        pol = random_policy(ch, "one_way", u_size=2, rng=np.random.default_rng(seed))
        j = assemble_joint(ch, pol, "one_way")
        c12 = 0.9
        p = pentagon_one_way(j, c12)
        if not p.feasible:
            continue
        from macstate.probcore import conditional_mutual_information

        i_us = conditional_mutual_information(j, ["u"], ["s1", "s2"])
        assert p.a1 - (c12 - i_us) == pytest.approx(0.0, abs=1e-10)


def test_two_way_noncooperative_matches_one_way():
    ch = build_switch_bsc(0.01)
    pol1 = uniform_policy(ch, "one_way", 1)
    pol2 = one_way_policy_as_two_way(pol1)
    j1 = assemble_joint(ch, pol1, "one_way")
    j2 = assemble_joint(ch, pol2, "two_way")
    p1 = pentagon_one_way(j1, 0.0)
    p2 = pentagon_two_way(j2, 0.0, 0.0)
    assert p2.a1 == pytest.approx(p1.a1, abs=1e-10)
    assert p2.a2 == pytest.approx(p1.a2, abs=1e-10)
    assert p2.a12 == pytest.approx(p1.a12, abs=1e-10)


def test_two_way_reduction_to_one_way_random_policies():
    ch = build_switch_bsc(0.01)
    for seed in range(5):
        pol1 = random_policy(ch, "one_way", u_size=2, rng=np.random.default_rng(seed))
        pol2 = one_way_policy_as_two_way(pol1)
        j1 = assemble_joint(ch, pol1, "one_way")
        j2 = assemble_joint(ch, pol2, "two_way")
        for c12 in (0.0, 0.3, 1.0):
            p1 = pentagon_one_way(j1, c12)
            p2 = pentagon_two_way(j2, c12, 0.0)
            assert p1.feasible == p2.feasible
            if p1.feasible:
                assert p2.a1 == pytest.approx(p1.a1, abs=1e-10)
                assert p2.a2 == pytest.approx(p1.a2, abs=1e-10)
                assert p2.a12 == pytest.approx(p1.a12, abs=1e-10)


def test_two_way_correlated_states_spend_link_on_message():
    # S1 = S2: state sharing is free, so the full c12 becomes rate credit.
    rng = np.random.default_rng(12)
    state = Pmf([0.5, 0.0, 0.0, 0.5])
    kern = rng.random((2, 2, 2, 2, 2)) + 0.05
    kern /= kern.sum(axis=-1, keepdims=True)
    ch = MacChannel(2, 2, 2, 2, 2, state, CondPmf(kern))
    pol = random_policy(ch, "two_way", u_size=2, v_size=2, rng=rng)
    j = assemble_joint(ch, pol, "two_way")
    p0 = pentagon_two_way(j, 0.0, 0.0)
    p1 = pentagon_two_way(j, 0.4, 0.0)
    assert p0.feasible  # I(U;S1|S2) = 0, so even c12 = 0 is feasible
    assert p1.a1 == pytest.approx(p0.a1 + 0.4, abs=1e-10)


def test_split_reduces_to_state_only_without_message_link():
    ch = build_switch_bsc(0.01)
    for seed in range(4):
        pol1 = random_policy(ch, "one_way", u_size=2, rng=np.random.default_rng(seed))
        pols = AuxPolicy(
            u_given=pol1.u_given,
            v_given=CondPmf(np.ones((1,)).reshape(1)),
            x1_given=CondPmf(pol1.x1_given.table.reshape(2, 2, 1, 2)),
            x2_given=CondPmf(pol1.x2_given.table.reshape(2, 1, 2)),
        )
        j1 = assemble_joint(ch, pol1, "one_way")
        js = assemble_joint(ch, pols, "split")
        c = 0.6
        p_state = pentagon_state_only(j1, c)
        p_split = pentagon_split(js, 0.0, c)
        assert p_split.a1 == pytest.approx(p_state.a1, abs=1e-10)
        assert p_split.a2 == pytest.approx(p_state.a2, abs=1e-10)
        # split sum bound: min(I(..|S,U,V), I(..|S,U)) = state-only bound when V trivial
        assert p_split.a12 == pytest.approx(p_state.a12, abs=1e-10)


def test_split_reduces_to_message_only_without_state_link():
    ch = build_switch_bsc(0.01)
    rng = np.random.default_rng(3)
    mo = random_policy(ch, "message_only", u_size=2, rng=rng)
    # Same behavior in split form: U trivial, V plays the message role.
    split_pol = AuxPolicy(
        u_given=CondPmf(np.ones((2, 1))),
        v_given=CondPmf(mo.u_given.table[0]),
        x1_given=CondPmf(mo.x1_given.table.reshape(2, 1, 2, 2)),
        x2_given=CondPmf(mo.x2_given.table.reshape(1, 2, 2)),
    )
    jm = assemble_joint(ch, mo, "message_only")
    js = assemble_joint(ch, split_pol, "split")
    c = 0.45
    pm = pentagon_message_only(jm, c)
    ps = pentagon_split(js, c, 0.0)
    assert ps.a1 == pytest.approx(pm.a1, abs=1e-10)
    assert ps.a2 == pytest.approx(pm.a2, abs=1e-10)
    # message_only second sum branch conditions on S only; split's conditions on (S,U)
    # which coincide here because U is degenerate.
    assert ps.a12 == pytest.approx(pm.a12, abs=1e-10)


def test_state_only_degenerate_u_is_noncooperative():
    ch = build_switch_bsc(0.01)
    j = assemble_joint(ch, uniform_policy(ch, "one_way", 1), "one_way")
    p = pentagon_state_only(j, 0.7)
    q = pentagon_one_way(j, 0.0)
    assert p.a1 == pytest.approx(q.a1, abs=1e-12)
    assert p.a2 == pytest.approx(q.a2, abs=1e-12)
    assert p.a12 == pytest.approx(q.a12, abs=1e-12)


def test_state_only_full_state_share():
    ch = build_switch_bsc(0.01)
    j = assemble_joint(ch, state_copy_policy(ch), "one_way")
    assert not pentagon_state_only(j, 0.5).feasible
    p = pentagon_state_only(j, 1.0)  # c12 >= H(S) = 1
    assert p.feasible and p.a2 > 0


def test_message_only_rejects_state_correlated_u():
    ch = build_switch_bsc(0.01)
    j = assemble_joint(ch, state_copy_policy(ch), "one_way")
    with pytest.raises(WrongModeJoint):
        pentagon_message_only(j, 0.5)


def test_message_only_sum_bound_saturates():
    ch = build_switch_bsc(0.01)
    j = assemble_joint(ch, uniform_policy(ch, "one_way", 1), "one_way")
    from macstate.probcore import conditional_mutual_information

    cap = conditional_mutual_information(j, ["x1", "x2"], ["y"], ["s1", "s2"])
    p = pentagon_message_only(j, 5.0)
    assert p.a12 == pytest.approx(cap, abs=1e-12)


def test_pentagon_rules_reject_wrong_joint_shape():
    ch = build_switch_bsc(0.01)
    j1 = assemble_joint(ch, uniform_policy(ch, "one_way", 1), "one_way")
    js = assemble_joint(ch, uniform_policy(ch, "split", 1, 1), "split")
    with pytest.raises(WrongModeJoint):
        pentagon_two_way(j1, 0.1, 0.1)
    with pytest.raises(WrongModeJoint):
        pentagon_one_way(js, 0.1)


def test_pentagon_monotone_in_cooperation():
    ch = build_switch_bsc(0.01)
    pol = random_policy(ch, "one_way", u_size=2, rng=np.random.default_rng(5))
    j = assemble_joint(ch, pol, "one_way")
    rates = np.linspace(0.0, 1.2, 7)
    pents = [pentagon_one_way(j, c) for c in rates]
    feas = [p for p in pents if p.feasible]
    for p, q in zip(feas[:-1], feas[1:]):
        assert q.a1 >= p.a1 - 1e-12
        assert q.a2 >= p.a2 - 1e-12
        assert q.a12 >= p.a12 - 1e-12


def test_pentagon_bounds_clamped_nonnegative():
    p = Pentagon(0.0, 0.0, 0.0)
    assert p.vertices() == [RatePoint(0.0, 0.0)]
    with pytest.raises(ValidationError):
        Pentagon(-0.1, 0.5, 0.5)


# ---------------------------------------------------------------------------
# hull / containment / comparison
# ---------------------------------------------------------------------------

def test_hull_single_pentagon_three_segments():
    r = hull_union([Pentagon(0.6, 0.5, 0.8)])
    expect = [(0.0, 0.5), (0.3, 0.5), (0.6, 0.2), (0.6, 0.0)]
    assert len(r.boundary) == 4
    for got, want in zip(r.boundary, expect):
        assert got.r1 == pytest.approx(want[0], abs=1e-12)
        assert got.r2 == pytest.approx(want[1], abs=1e-12)


def test_hull_single_pentagon_slack_sum_two_segments():
    r = hull_union([Pentagon(0.6, 0.5, 2.0)])
    assert r.boundary == (RatePoint(0.0, 0.5), RatePoint(0.6, 0.5), RatePoint(0.6, 0.0))


def test_hull_nested_pentagons_outer_only():
    outer = Pentagon(1.0, 1.0, 1.5)
    inner = Pentagon(0.4, 0.4, 0.6)
    assert hull_union([outer, inner]).boundary == hull_union([outer]).boundary


def test_hull_crossing_rectangles_time_sharing_chord():
    r1 = Pentagon(1.0, 0.2, 10.0)
    r2 = Pentagon(0.2, 1.0, 10.0)
    region = hull_union([r1, r2])
    # Hull is exactly {x <= 1, y <= 1, x + y <= 1.2}: the chord joins the corners.
    assert RatePoint(1.0, 0.2) in region.boundary
    assert RatePoint(0.2, 1.0) in region.boundary
    oracle = Pentagon(1.0, 1.0, 1.2)
    grid = np.linspace(0.0, 1.1, 200)
    for x in grid:
        for y in grid[::7]:  # thinned inner loop keeps the test quick
            assert region_contains(region, RatePoint(x, y), 1e-9) == oracle.contains(
                RatePoint(x, y), 1e-9
            )


def test_hull_all_infeasible_empty():
    r = hull_union([Pentagon.infeasible(), Pentagon.infeasible()])
    assert r.is_empty


def test_region_contains_basics():
    region = hull_union([Pentagon(0.6, 0.5, 0.8)])
    assert region_contains(region, RatePoint(0.0, 0.0), 1e-9)
    assert not region_contains(region, RatePoint(0.7, 0.0), 1e-9)
    for v in region.boundary:  # closure includes the frontier
        assert region_contains(region, v, 1e-9)
    assert not region_contains(region, RatePoint(0.35, 0.5), 1e-9)  # above the sum face


def test_region_contains_agrees_with_sandwich_oracle():
    rng = np.random.default_rng(31)
    pents = [
        Pentagon(*sorted(rng.random(2) + 0.1)[::-1], a12=float(rng.random() + 0.3))
        for _ in range(3)
    ]
    region = hull_union(pents)
    # Outer oracle: dense support-function sampling of the same pentagon set.
    angles = np.linspace(0.0, np.pi / 2, 721)
    mus = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    supports = np.array([max(p.support(m[0], m[1]) for p in pents) for m in mus])
    pts = rng.random((10000, 2)) * 1.5
    for x, y in pts:
        inside = region_contains(region, RatePoint(x, y), 1e-9)
        in_some_pentagon = any(p.contains(RatePoint(x, y)) for p in pents)
        violates_outer = np.any(mus @ np.array([x, y]) > supports + 1e-6)
        if in_some_pentagon:
            assert inside
        if violates_outer:
            assert not inside


def test_region_compare_classifications():
    a = hull_union([Pentagon(0.5, 0.5, 0.8)])
    b = hull_union([Pentagon(0.7, 0.7, 1.1)])
    c = hull_union([Pentagon(1.0, 0.2, 10.0)])
    d = hull_union([Pentagon(0.2, 1.0, 10.0)])
    assert region_compare(a, a, 1e-9) == "equal"
    assert region_compare(a, b, 1e-9) == "a_subset_b"
    assert region_compare(b, a, 1e-9) == "b_subset_a"
    assert region_compare(c, d, 1e-9) == "crossing"


def test_hausdorff_nested_regions():
    a = hull_union([Pentagon(0.5, 0.5, 1.0)])
    b = hull_union([Pentagon(0.5, 0.6, 1.1)])
    assert directed_hausdorff(a, b) == pytest.approx(0.0, abs=1e-12)
    assert hausdorff_distance(a, b) == pytest.approx(0.1, abs=1e-9)
    assert hausdorff_distance(a, a) == 0.0


def test_point_region_distance():
    r = hull_union([Pentagon(1.0, 1.0, 2.0)])
    assert point_region_distance(RatePoint(0.5, 0.5), r) == 0.0
    assert point_region_distance(RatePoint(1.5, 0.5), r) == pytest.approx(0.5, abs=1e-12)


def test_frontier_concavity_on_random_unions():
    rng = np.random.default_rng(41)
    for _ in range(25):
        pents = [
            Pentagon(float(rng.random() + 0.05), float(rng.random() + 0.05),
                     float(rng.random() * 1.5 + 0.05))
            for _ in range(rng.integers(1, 6))
        ]
        region = hull_union(pents)
        assert frontier_is_concave(region, 1e-9)
        r2s = [p.r2 for p in region.boundary]
        assert all(b <= a + 1e-12 for a, b in zip(r2s[:-1], r2s[1:]))


def test_region_csv_format():
    region = hull_union([Pentagon(0.5, 0.25, 1.0)])
    text = region_to_csv(region, header=["mode=one_way, c12=0.200000"])
    lines = text.strip().split("\n")
    assert lines[0] == "# mode=one_way, c12=0.200000"
    assert lines[1] == "r1,r2"
    assert lines[2] == "0.000000,0.250000"
    assert lines[-1] == "0.500000,0.000000"


def test_degenerate_region_single_point():
    r = hull_union([Pentagon(0.0, 0.0, 0.0)])
    assert r.boundary == (RatePoint(0.0, 0.0),)
    assert region_contains(r, RatePoint(0.0, 0.0), 1e-9)
    assert not region_contains(r, RatePoint(0.1, 0.0), 1e-9)
