"""Acceptance suite: one test per criterion, each printing a PASS line.

Traces are cached in module scope; criteria with runtime budgets populate
their own traces inside the timed block (tests in this file run in order).
Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS lines.
"""
import time

import numpy as np
import pytest

from macstate.binsim import SimParams, estimate_error
from macstate.cli import main as cli_main
from macstate.macmodel import (
    AuxPolicy,
    CoopConfig,
    InputConstraint,
    MacChannel,
    build_switch_bsc,
    uniform_policy,
    with_constraints,
)
from macstate.optimizer import (
    SearchConfig,
    closed_form_example_region,
    closed_form_r1_discrepancy,
    equal_rate_point,
    trace_boundary,
)
from macstate.probcore import CondPmf, Pmf, binary_entropy, bernoulli_convolve
from macstate.rateregion import (
    RatePoint,
    directed_hausdorff,
    frontier_is_concave,
    hausdorff_distance,
    region_compare,
    region_contains,
)

ACC = SearchConfig(weight_count=65, restarts=10, local_steps=120, step_decay=0.91, seed=7)
ACC_U3 = SearchConfig(weight_count=65, restarts=10, local_steps=120, step_decay=0.91, seed=7,
                      u_card=3)
ACC_SPLIT = SearchConfig(weight_count=65, restarts=10, local_steps=120, step_decay=0.91, seed=7,
                         v_card=2)
LIGHT = SearchConfig(weight_count=13, restarts=5, local_steps=50, step_decay=0.85, seed=3)
LIGHT_V1 = SearchConfig(weight_count=13, restarts=5, local_steps=50, step_decay=0.85, seed=3,
                        v_card=1)
MED = SearchConfig(weight_count=17, restarts=8, local_steps=80, step_decay=0.88, seed=3)

SWITCH = with_constraints(build_switch_bsc(0.01), InputConstraint(0.25, 0.25))
SWITCH_FREE = with_constraints(build_switch_bsc(0.01), InputConstraint(0.5, 0.5))

_cache: dict = {}


def switch_trace(mode: str, cfg=ACC, channel=SWITCH, **rates):
    key = (mode, tuple(sorted(rates.items())), id(channel), cfg)
    if key not in _cache:
        _cache[key] = trace_boundary(channel, CoopConfig(mode, **rates), None, cfg)
    return _cache[key]


def random_small_channel(rng, s1: int) -> MacChannel:
    x1, x2, y = (int(rng.integers(2, 4)) for _ in range(3))
    state = rng.random(s1) + 0.15
    state /= state.sum()
    kern = rng.random((s1, 1, x1, x2, y)) + 0.1
    kern /= kern.sum(axis=-1, keepdims=True)
    return MacChannel(s1, 1, x1, x2, y, Pmf(state), CondPmf(kern))


def report(num: int, text: str) -> None:
    print(f"[ACCEPTANCE] criterion {num}: PASS — {text}")


def test_criterion_1_special_case_reductions():
    t0 = time.monotonic()
    worst_stateless = 0.0
    worst_twoway = 0.0
    for seed in range(5):
        rng = np.random.default_rng([41, seed])
        c12 = float(rng.uniform(0.1, 0.6))
        # |S| = 1: the one-way region must equal the memoryless
        # message-cooperation region computed through its own pentagon rule.
        ch1 = random_small_channel(rng, s1=1)
        r_ow = trace_boundary(ch1, CoopConfig("one_way", c12=c12), None, MED).region
        r_wl = trace_boundary(ch1, CoopConfig("message_only", c12=c12), None, MED).region
        worst_stateless = max(worst_stateless, hausdorff_distance(r_ow, r_wl))
        # degenerate S2, V, c21: two-way collapses onto one-way
        ch2 = random_small_channel(rng, s1=int(rng.integers(2, 4)))
        r_one = trace_boundary(ch2, CoopConfig("one_way", c12=c12), None, LIGHT).region
        r_two = trace_boundary(ch2, CoopConfig("two_way", c12=c12, c21=0.0), None, LIGHT_V1).region
        worst_twoway = max(worst_twoway, hausdorff_distance(r_one, r_two))
    elapsed = time.monotonic() - t0
    assert worst_stateless < 5e-3, f"stateless reduction Hausdorff {worst_stateless}"
    assert worst_twoway < 5e-3, f"two-way reduction Hausdorff {worst_twoway}"
    assert elapsed < 120.0, f"criterion 1 took {elapsed:.0f}s"
    report(1, f"reductions: stateless gap {worst_stateless:.2e}, two-way gap {worst_twoway:.2e}, "
              f"{elapsed:.0f}s")


def test_criterion_2_nesting_and_saturation():
    t0 = time.monotonic()
    regions = {c: switch_trace("one_way", c12=c).region for c in (0.0, 0.2, 0.5, 1.0)}
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"criterion 2 took {elapsed:.0f}s"
    chain = [0.0, 0.2, 0.5, 1.0]
    for small, big in zip(chain[:-1], chain[1:]):
        verdict = region_compare(regions[small], regions[big], 2e-3)
        assert verdict in ("a_subset_b", "equal"), f"{small} vs {big}: {verdict}"
    sat = hausdorff_distance(regions[0.5], regions[1.0])
    if sat >= 0.02:
        print(f"[ACCEPTANCE] criterion 2: FAIL — nesting holds at 2e-3 ({elapsed:.0f}s), but "
              f"H(region(0.5), region(1)) = {sat:.4f} >= 0.02. The distance between the true "
              f"regions is ~0.0219 bits (max R1 is 0.9192 at c12=1 vs 0.8973 at c12=0.5, "
              f"certified by independent fine-grid optimization of the specialized formulas "
              f"and by the general tracer at |U| in 2..4), so the 0.02 threshold is not "
              f"attainable by any faithful trace; see the project notes.")
    assert sat < 0.02, f"saturation Hausdorff {sat:.4f}; true value ~0.0219 exceeds the bound"
    report(2, f"nested chain at 2e-3; H(region(0.5), region(1)) = {sat:.4f} < 0.02, {elapsed:.0f}s")


def test_criterion_3_cardinality_robustness():
    t0 = time.monotonic()
    r2 = switch_trace("one_way", c12=0.2).region
    r3 = switch_trace("one_way", cfg=ACC_U3, c12=0.2).region
    elapsed = time.monotonic() - t0
    gap = hausdorff_distance(r2, r3)
    assert gap < 5e-3, f"|U|=2 vs |U|=3 Hausdorff {gap}"
    assert elapsed < 300.0, f"criterion 3 took {elapsed:.0f}s"
    report(3, f"|U|=2 vs |U|=3 Hausdorff {gap:.2e} < 5e-3, {elapsed:.0f}s")


def test_criterion_4_three_cooperation_geometries():
    nocoop = switch_trace("one_way", c12=0.0).region
    state = switch_trace("state_only", c12=0.5).region
    message = switch_trace("message_only", c12=0.5).region
    oneway = switch_trace("one_way", c12=0.5).region
    # state cooperation only stretches R2
    assert abs(state.max_r1 - nocoop.max_r1) < 2e-3
    assert state.max_r2 > nocoop.max_r2 + 0.01
    # message cooperation only stretches R1
    assert abs(message.max_r2 - nocoop.max_r2) < 2e-3
    assert message.max_r1 > nocoop.max_r1 + 0.01
    # joint cooperation strictly contains both, in the orthogonal directions
    assert region_compare(state, oneway, 2e-3) in ("a_subset_b", "equal")
    assert region_compare(message, oneway, 2e-3) in ("a_subset_b", "equal")
    assert oneway.max_r1 > state.max_r1 + 0.01
    assert oneway.max_r2 > message.max_r2 + 0.01
    report(4, f"state-only: ΔR1 {abs(state.max_r1 - nocoop.max_r1):.1e}, "
              f"message-only: ΔR2 {abs(message.max_r2 - nocoop.max_r2):.1e}; both inside one-way")


def test_criterion_5_split_strictly_suboptimal():
    split = switch_trace("split", cfg=ACC_SPLIT, c12m=0.25, c12s=0.25).region
    oneway = switch_trace("one_way", c12=0.5).region
    verdict = region_compare(split, oneway, 2e-3)
    assert verdict in ("a_subset_b", "equal"), verdict
    gap = directed_hausdorff(oneway, split)
    assert gap > 0.01, f"frontier gap {gap}"
    report(5, f"split(0.25,0.25) ⊂ one_way(0.5), max frontier gap {gap:.4f} > 0.01")


def test_criterion_6_equal_rate_and_unconstrained_claims():
    r_state = equal_rate_point(switch_trace("state_only", c12=0.5).region)
    r_oneway = equal_rate_point(switch_trace("one_way", c12=0.5).region)
    assert abs(r_state - r_oneway) < 2e-3, (r_state, r_oneway)
    # no effective weight constraint: message-only cooperation is optimal
    free_msg = switch_trace("message_only", channel=SWITCH_FREE, c12=0.5).region
    free_ow = switch_trace("one_way", channel=SWITCH_FREE, c12=0.5).region
    gap = hausdorff_distance(free_msg, free_ow)
    assert gap < 5e-3, f"unconstrained message-only vs one-way Hausdorff {gap}"
    report(6, f"equal-rate point match |Δ| = {abs(r_state - r_oneway):.2e}; "
              f"unconstrained message-only gap {gap:.2e}")


def test_criterion_7_convexity_and_grid_containment():
    checked = 0
    for key, res in list(_cache.items()):
        assert frontier_is_concave(res.region, 1e-9), f"frontier not concave for {key}"
        checked += 1
    assert checked >= 8
    res = switch_trace("one_way", c12=0.2)
    pents = [w.pentagon for w in res.witnesses]
    region = res.region
    rng = np.random.default_rng(77)
    angles = np.linspace(0.0, np.pi / 2, 721)
    mus = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    supports = np.array([max(p.support(m[0], m[1]) for p in pents) for m in mus])
    pts = rng.random((10000, 2)) * np.array([region.max_r1 * 1.3, region.max_r2 * 1.3])
    inside_union = outside_hull = 0
    for x, y in pts:
        q = RatePoint(float(x), float(y))
        contained = region_contains(region, q, 1e-9)
        if any(p.contains(q) for p in pents):
            assert contained, f"point {q} in a witness pentagon but not in the region"
            inside_union += 1
        if np.any(mus @ np.array([x, y]) > supports + 1e-6):
            assert not contained, f"point {q} outside the hull's support but in the region"
            outside_hull += 1
    assert inside_union > 1000 and outside_hull > 1000
    report(7, f"{checked} frontiers concave; 10^4-point grid agrees with the "
              f"pentagon-membership oracle ({inside_union} inside, {outside_hull} outside)")


def test_criterion_8_closed_form_cross_validation():
    d = closed_form_r1_discrepancy(0.01, 0.25)
    gaps = {}
    for c12 in (0.0, 0.2):
        general = switch_trace("one_way", c12=c12).region
        closed = closed_form_example_region(0.01, 0.25, 0.25, c12, ACC)
        gaps[c12] = hausdorff_distance(general, closed)
        assert gaps[c12] < 5e-3, f"c12={c12}: Hausdorff {gaps[c12]}"
        # the optimizer arbitrates the R1-bound form: it reaches the
        # concentrated-weight value, not the spread-weight one
        want = d["concentrated"] + c12
        spread = d["printed"] + c12
        assert abs(general.max_r1 - want) < 2e-3
        assert general.max_r1 > spread + 0.05
    report(8, "closed form vs tracer Hausdorff "
              + ", ".join(f"c12={c}: {g:.2e}" for c, g in gaps.items())
              + f"; R1 bound resolved to the concentrated form "
                f"(+{d['difference']:.4f} bits over the spread form)")


def test_criterion_9_simulator_separation():
    t0 = time.monotonic()
    kern = np.zeros((1, 1, 2, 2, 2))
    for x1 in range(2):
        for x2 in range(2):
            kern[0, 0, x1, x2, (x1 + x2) % 2] = 1.0
    ch = MacChannel(1, 1, 2, 2, 2, Pmf([1.0]), CondPmf(kern))
    pol = uniform_policy(ch, "one_way", u_size=1)
    # the policy's pentagon is (1, 1, 1); take 50% of the symmetric vertex
    medians = []
    for n in (8, 12, 16):
        errs = [
            estimate_error(SimParams(ch, pol, n=n, r1=0.25, r2=0.25, c12=0.0,
                                     eps=0.9, trials=400, seed=s)).error_rate
            for s in range(5)
        ]
        medians.append(float(np.median(errs)))
    inversions = sum(b > a for a, b in zip(medians[:-1], medians[1:]))
    assert inversions <= 1, medians
    assert medians[2] < medians[0], medians
    outside = estimate_error(SimParams(ch, pol, n=14, r1=0.6, r2=0.6, c12=0.0,
                                       eps=0.9, trials=2000, seed=0))
    assert outside.error_rate >= 0.3
    elapsed = time.monotonic() - t0
    assert elapsed < 180.0, f"criterion 9 took {elapsed:.0f}s"
    report(9, f"inside medians {medians} decreasing; outside error "
              f"{outside.error_rate:.3f} >= 0.3, {elapsed:.0f}s")


def test_criterion_10_manifest_determinism(tmp_path):
    argv = ["region", "--preset", "switch_bsc", "--pz", "0.01", "--p1", "0.25", "--p2", "0.25",
            "--mode", "one_way", "--c12", "0.2", "--weights", "9", "--restarts", "4",
            "--steps", "30", "--decay", "0.8", "--no-plot"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli_main(argv + ["--out", str(a)]) == 0
    assert cli_main(argv + ["--out", str(b)]) == 0
    ta = a.read_bytes().replace(b"a.csv", b"o.csv")
    tb = b.read_bytes().replace(b"b.csv", b"o.csv")
    assert ta == tb
    sim_argv = ["simulate", "--preset", "switch_bsc", "--pz", "0.0", "--r1", "0.2",
                "--r2", "0.2", "--n", "8,10", "--eps", "0.9", "--trials", "50",
                "--seed", "3", "--no-plot"]
    c, d = tmp_path / "c.csv", tmp_path / "d.csv"
    assert cli_main(sim_argv + ["--out", str(c)]) == 0
    assert cli_main(sim_argv + ["--out", str(d)]) == 0
    tc = c.read_bytes().replace(b"c.csv", b"o.csv")
    td = d.read_bytes().replace(b"d.csv", b"o.csv")
    assert tc == td
    report(10, "region and simulate manifests reproduce byte-identical CSV output")
