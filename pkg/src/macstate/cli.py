"""Command-line front end: region traces, comparisons, sweeps, simulations.

Every output file starts with '#'-prefixed manifest lines that pin the full
run configuration (command, channel, mode, rates, search or simulation
parameters, seed, toolkit version); re-running a manifest reproduces the
file byte for byte.  Region CSVs get a rendered figure next to them unless
--no-plot is passed.

Exit codes: 0 success, 1 input validation, 2 infeasible configuration,
3 resource guard.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .binsim import MemoryGuardError, SIM_CSV_HEADER, SimParams, estimate_error, sim_csv_row
from .macmodel import (
    AuxPolicy,
    CoopConfig,
    InputConstraint,
    MacChannel,
    build_switch_bsc,
    load_channel,
    uniform_policy,
    with_constraints,
)
from .optimizer import SearchConfig, trace_boundary
from .probcore import CondPmf, ValidationError
from .rateregion import RateRegion, directed_hausdorff, region_compare, region_to_csv


class CliError(Exception):
    """Input validation failure; maps to exit code 1."""


class InfeasibleRun(Exception):
    """The configuration admits no achievable rate pair; exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse's default exit(2) clashes with "infeasible"
        raise CliError(message)


def _add_channel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=["switch_bsc"], help="built-in channel family")
    p.add_argument("--pz", type=float, default=0.01, help="crossover of the switch BSC arm")
    p.add_argument("--channel", type=str, help="channel spec JSON file")
    p.add_argument("--p1", type=float, default=None, help="weight cap for encoder 1")
    p.add_argument("--p2", type=float, default=None, help="weight cap for encoder 2")


def _add_search_args(p: argparse.ArgumentParser) -> None:
    d = SearchConfig()
    p.add_argument("--u-card", type=int, default=d.u_card)
    p.add_argument("--v-card", type=int, default=d.v_card)
    p.add_argument("--weights", type=int, default=d.weight_count, help="number of sweep directions")
    p.add_argument("--restarts", type=int, default=d.restarts)
    p.add_argument("--steps", type=int, default=d.local_steps, help="ascent sweeps per direction")
    p.add_argument("--decay", type=float, default=d.step_decay)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--seed", type=int, default=d.seed)


def _add_coop_args(p: argparse.ArgumentParser, c12_list: bool = False) -> None:
    p.add_argument("--mode", choices=["one_way", "two_way", "split", "state_only", "message_only"],
                   default="one_way")
    if c12_list:
        p.add_argument("--c12", type=str, default="0",
                       help="comma list of cooperation rates to sweep")
    else:
        p.add_argument("--c12", type=float, default=0.0)
    p.add_argument("--c21", type=float, default=0.0)
    p.add_argument("--c12m", type=float, default=0.0)
    p.add_argument("--c12s", type=float, default=0.0)


def build_parser() -> _Parser:
    ap = _Parser(prog="macstate", description=__doc__)
    ap.add_argument("--version", action="version", version=f"macstate {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("region", parents=[], help="trace one region and export its frontier")
    _add_channel_args(reg)
    _add_coop_args(reg)
    _add_search_args(reg)
    reg.add_argument("--out", type=str, required=True, help="frontier CSV path")
    reg.add_argument("--no-plot", action="store_true")

    cmp_ = sub.add_parser("compare", help="trace several configurations and classify each pair")
    _add_channel_args(cmp_)
    _add_search_args(cmp_)
    cmp_.add_argument("--spec", action="append", required=True,
                      help="mode:key=val[,key=val] (repeat; at least two)")
    cmp_.add_argument("--out-dir", type=str, required=True)
    cmp_.add_argument("--compare-tol", type=float, default=2e-3)
    cmp_.add_argument("--no-plot", action="store_true")

    sim = sub.add_parser("simulate", help="run the binning-code Monte-Carlo experiment")
    _add_channel_args(sim)
    sim.add_argument("--policy", choices=["uniform", "state_copy"], default="uniform")
    sim.add_argument("--policy-file", type=str, help="JSON policy dump overriding --policy")
    sim.add_argument("--u-card", type=int, default=1)
    sim.add_argument("--n", type=str, default="8,12,16", help="comma list of blocklengths")
    sim.add_argument("--r1", type=float, required=True)
    sim.add_argument("--r2", type=float, required=True)
    sim.add_argument("--c12", type=float, default=0.0)
    sim.add_argument("--eps", type=float, default=0.9)
    sim.add_argument("--trials", type=int, default=500)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", type=str, required=True)
    sim.add_argument("--no-plot", action="store_true")

    sw = sub.add_parser("sweep", help="trace one mode across several cooperation rates")
    _add_channel_args(sw)
    _add_coop_args(sw, c12_list=True)
    _add_search_args(sw)
    sw.add_argument("--out-dir", type=str, required=True)
    sw.add_argument("--compare-tol", type=float, default=2e-3)
    sw.add_argument("--no-plot", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# shared assembly helpers
# ---------------------------------------------------------------------------

def _channel_from_args(args) -> tuple[MacChannel, dict]:
    if args.channel and args.preset:
        raise CliError("give either --preset or --channel, not both")
    if args.channel:
        try:
            ch = load_channel(args.channel)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read channel spec: {e}") from e
        source = {"file": args.channel}
    elif args.preset == "switch_bsc":
        if not 0.0 <= args.pz <= 1.0:
            raise CliError(f"--pz must lie in [0,1], got {args.pz}")
        ch = build_switch_bsc(args.pz)
        source = {"preset": "switch_bsc", "pz": args.pz}
    else:
        raise CliError("a channel is required: --preset switch_bsc or --channel FILE")
    if args.p1 is not None or args.p2 is not None:
        for name, v in (("p1", args.p1), ("p2", args.p2)):
            if v is not None and not 0.0 <= v <= 1.0:
                raise CliError(f"--{name} must lie in [0,1], got {v}")
        ch = with_constraints(ch, InputConstraint(args.p1, args.p2))
        source["constraints"] = {"p1": args.p1, "p2": args.p2}
    return ch, source


def _coop_from_args(mode: str, c12: float, c21: float, c12m: float, c12s: float) -> CoopConfig:
    for name, v in (("c12", c12), ("c21", c21), ("c12m", c12m), ("c12s", c12s)):
        if v < 0 or not np.isfinite(v):
            raise CliError(f"--{name} must be finite and >= 0, got {v}")
    kw = {}
    if mode == "two_way":
        kw = {"c12": c12, "c21": c21}
    elif mode == "split":
        kw = {"c12m": c12m, "c12s": c12s}
    else:
        kw = {"c12": c12}
    return CoopConfig(mode, **kw)


def _search_from_args(args) -> SearchConfig:
    try:
        return SearchConfig(
            u_card=args.u_card,
            v_card=args.v_card,
            weight_count=args.weights,
            restarts=args.restarts,
            local_steps=args.steps,
            step_decay=args.decay,
            tol=args.tol,
            seed=args.seed,
        )
    except ValidationError as e:
        raise CliError(str(e)) from e


def _manifest(command: str, source: dict, **fields) -> list[str]:
    payload = {"command": command, "channel": source, "version": __version__, **fields}
    return [
        "macstate report",
        "manifest: " + json.dumps(payload, sort_keys=True, separators=(",", ":")),
    ]


def _coop_header(coop: CoopConfig) -> str:
    if coop.mode == "two_way":
        return f"mode={coop.mode}, c12={coop.c12:.6f}, c21={coop.c21:.6f}"
    if coop.mode == "split":
        return f"mode={coop.mode}, c12m={coop.c12m:.6f}, c12s={coop.c12s:.6f}"
    return f"mode={coop.mode}, c12={coop.c12:.6f}"


def _coop_fields(coop: CoopConfig) -> dict:
    out = {"mode": coop.mode}
    if coop.mode == "two_way":
        out.update(c12=coop.c12, c21=coop.c21)
    elif coop.mode == "split":
        out.update(c12m=coop.c12m, c12s=coop.c12s)
    else:
        out.update(c12=coop.c12)
    return out


def _cfg_fields(cfg: SearchConfig) -> dict:
    return {
        "u_card": cfg.u_card, "v_card": cfg.v_card, "weight_count": cfg.weight_count,
        "restarts": cfg.restarts, "local_steps": cfg.local_steps,
        "step_decay": cfg.step_decay, "tol": cfg.tol, "seed": cfg.seed,
    }


def policy_to_dict(pol: AuxPolicy) -> dict:
    out = {
        "u_given": pol.u_given.table.tolist(),
        "x1_given": pol.x1_given.table.tolist(),
        "x2_given": pol.x2_given.table.tolist(),
    }
    if pol.v_given is not None:
        out["v_given"] = pol.v_given.table.tolist()
    return out


def policy_from_dict(d: dict) -> AuxPolicy:
    try:
        return AuxPolicy(
            u_given=CondPmf(np.asarray(d["u_given"], dtype=float)),
            x1_given=CondPmf(np.asarray(d["x1_given"], dtype=float)),
            x2_given=CondPmf(np.asarray(d["x2_given"], dtype=float)),
            v_given=CondPmf(np.asarray(d["v_given"], dtype=float)) if "v_given" in d else None,
        )
    except KeyError as e:
        raise CliError(f"policy dump missing table {e.args[0]!r}") from None


def _trace(ch: MacChannel, coop: CoopConfig, cfg: SearchConfig):
    res = trace_boundary(ch, coop, None, cfg)
    if res.region.is_empty:
        raise InfeasibleRun(f"no achievable rate pair for {coop.mode}")
    return res


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_region(args) -> int:
    ch, source = _channel_from_args(args)
    coop = _coop_from_args(args.mode, args.c12, args.c21, args.c12m, args.c12s)
    cfg = _search_from_args(args)
    res = _trace(ch, coop, cfg)
    out = Path(args.out)
    manifest = _manifest("region", source, coop=_coop_fields(coop), search=_cfg_fields(cfg),
                         out=str(out))
    _write(out, region_to_csv(res.region, manifest + [_coop_header(coop)]))
    witnesses = [
        {"r1": v.r1, "r2": v.r2, "mu": list(w.mu), "value": w.value,
         "policy": policy_to_dict(w.policy)}
        for v, w in res.vertex_witnesses
    ]
    _write(out.with_suffix(".witnesses.json"),
           json.dumps({"manifest": manifest[1], "witnesses": witnesses}, indent=1) + "\n")
    if not args.no_plot:
        from .plotting import plot_regions

        plot_regions([(_coop_header(coop), res.region)], out.with_suffix(".png"),
                     title="achievable rate region")
    return 0


def parse_compare_spec(text: str) -> tuple[str, dict]:
    mode, _, rest = text.partition(":")
    if mode not in ("one_way", "two_way", "split", "state_only", "message_only"):
        raise CliError(f"unknown mode in --spec {text!r}")
    rates = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if key not in ("c12", "c21", "c12m", "c12s"):
                raise CliError(f"unknown rate {key!r} in --spec {text!r}")
            try:
                rates[key] = float(val)
            except ValueError:
                raise CliError(f"bad value for {key!r} in --spec {text!r}") from None
    return mode, rates


def cmd_compare(args) -> int:
    ch, source = _channel_from_args(args)
    cfg = _search_from_args(args)
    if len(args.spec) < 2:
        raise CliError("compare needs at least two --spec entries")
    runs: list[tuple[str, CoopConfig, RateRegion]] = []
    out_dir = Path(args.out_dir)
    for spec in args.spec:
        mode, rates = parse_compare_spec(spec)
        coop = _coop_from_args(mode, rates.get("c12", 0.0), rates.get("c21", 0.0),
                               rates.get("c12m", 0.0), rates.get("c12s", 0.0))
        res = _trace(ch, coop, cfg)
        label = spec.replace(":", "_").replace(",", "_").replace("=", "")
        manifest = _manifest("compare", source, coop=_coop_fields(coop),
                             search=_cfg_fields(cfg), spec=spec)
        _write(out_dir / f"{label}.csv",
               region_to_csv(res.region, manifest + [_coop_header(coop)]))
        runs.append((spec, coop, res.region))
    verdicts = []
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            la, _, ra = runs[i]
            lb, _, rb = runs[j]
            verdict = region_compare(ra, rb, args.compare_tol)
            gap = max(directed_hausdorff(ra, rb), directed_hausdorff(rb, ra))
            line = f"{la} vs {lb}: {verdict} (max_gap={gap:.6f})"
            verdicts.append(line)
            print(line)
    _write(out_dir / "verdicts.txt", "\n".join(verdicts) + "\n")
    if not args.no_plot:
        from .plotting import plot_regions

        plot_regions([(spec, region) for spec, _, region in runs],
                     out_dir / "compare.png", title="region comparison")
    return 0


def cmd_simulate(args) -> int:
    ch, source = _channel_from_args(args)
    if args.policy_file:
        with open(args.policy_file) as fh:
            pol = policy_from_dict(json.load(fh))
        pol_source = {"file": args.policy_file}
    elif args.policy == "state_copy":
        eye = np.eye(ch.s1_size)
        pol = AuxPolicy(
            u_given=CondPmf(eye),
            x1_given=CondPmf(np.full((ch.s1_size, ch.s1_size, ch.x1_size), 1.0 / ch.x1_size)),
            x2_given=CondPmf(np.full((ch.s1_size, ch.x2_size), 1.0 / ch.x2_size)),
        )
        pol_source = {"builtin": "state_copy"}
    else:
        pol = uniform_policy(ch, "one_way", u_size=args.u_card)
        pol_source = {"builtin": "uniform", "u_card": args.u_card}
    try:
        ns = [int(v) for v in args.n.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--n must be a comma list of integers, got {args.n!r}") from None
    if not ns:
        raise CliError("--n must name at least one blocklength")
    if args.trials < 1:
        raise CliError(f"--trials must be >= 1, got {args.trials}")

    rows = []
    results = []
    for n in ns:
        try:
            p = SimParams(ch, pol, n=n, r1=args.r1, r2=args.r2, c12=args.c12,
                          eps=args.eps, trials=args.trials, seed=args.seed)
            res = estimate_error(p)
        except MemoryGuardError as e:
            print(f"error: {e}", file=sys.stderr)
            return 3
        except ValidationError as e:
            raise CliError(str(e)) from e
        rows.append(sim_csv_row(p, res))
        results.append({"n": n, "error_rate": res.error_rate, "ci95": res.ci95_halfwidth})
    out = Path(args.out)
    manifest = _manifest(
        "simulate", source, policy=pol_source,
        sim={"n": ns, "r1": args.r1, "r2": args.r2, "c12": args.c12, "eps": args.eps,
             "trials": args.trials, "seed": args.seed,
             "bin_eps_rule": "bin exponent uses eps/2 of the typicality slack"},
        out=str(out),
    )
    lines = [f"# {h}" for h in manifest] + [SIM_CSV_HEADER] + rows
    _write(out, "\n".join(lines) + "\n")
    if not args.no_plot and len(results) > 1:
        from .plotting import plot_error_curves

        plot_error_curves(results, out.with_suffix(".png"),
                          title=f"r1={args.r1}, r2={args.r2}, c12={args.c12}")
    return 0


def cmd_sweep(args) -> int:
    ch, source = _channel_from_args(args)
    cfg = _search_from_args(args)
    try:
        rates = [float(v) for v in str(args.c12).split(",") if v.strip() != ""]
    except ValueError:
        raise CliError(f"--c12 must be a comma list of rates, got {args.c12!r}") from None
    if not rates:
        raise CliError("--c12 must name at least one cooperation rate")
    out_dir = Path(args.out_dir)
    regions = []
    for c in rates:
        coop = _coop_from_args(args.mode, c, args.c21, args.c12m, args.c12s)
        res = _trace(ch, coop, cfg)
        manifest = _manifest("sweep", source, coop=_coop_fields(coop), search=_cfg_fields(cfg))
        _write(out_dir / f"c12_{c:.6f}.csv",
               region_to_csv(res.region, manifest + [_coop_header(coop)]))
        regions.append((c, res.region))
    lines = []
    for (ca, ra), (cb, rb) in zip(regions[:-1], regions[1:]):
        verdict = region_compare(ra, rb, args.compare_tol)
        gap = directed_hausdorff(rb, ra)
        nested = verdict in ("a_subset_b", "equal")
        note = " saturated" if gap < 0.02 else ""
        lines.append(f"c12={ca:g} -> c12={cb:g}: {verdict} (growth={gap:.6f}){note}")
        if not nested:
            lines[-1] += "  [WARNING: not nested]"
    for line in lines:
        print(line)
    if lines:
        _write(out_dir / "nesting.txt", "\n".join(lines) + "\n")
    if not args.no_plot:
        from .plotting import plot_regions

        plot_regions([(f"c12={c:g}", r) for c, r in regions], out_dir / "sweep.png",
                     title=f"{args.mode} regions vs cooperation rate")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "region": cmd_region,
            "compare": cmd_compare,
            "simulate": cmd_simulate,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InfeasibleRun as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
