"""Command-line entry point wiring generators, exact solvers, the learning
pipeline, and report aggregation into reproducible experiments.

Commands: gen, exact, learn, reduce, report.  Every command writes a
manifest next to its output; re-running with the same flags reproduces the
outputs bit-identically (the manifest's timestamp aside).  Exit codes:
0 success, 1 usage, 2 invalid spec/precondition, 3 I/O failure, and 10
when `exact verify` refutes the profile.
"""

from __future__ import annotations

import argparse
import csv
import glob as globmod
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .equilibria import (
    REFUTED,
    PreconditionError,
    best_response_exact,
    full_revelation_profile,
    verify_nash,
)
from .game import CapError, ex_ante_utilities
from .io import (
    parse_tie_flag,
    read_game,
    read_policies,
    report_to_dict,
    write_game,
    write_manifest,
    write_policies,
    write_report,
    write_sidecar,
    load_or_sample_dataset,
)
from .learning import EgConfig, TrainConfig, find_local_ne
from .neural import save_params
from .reductions import (
    BimatrixGame,
    PublicPersuasionInstance,
    ReductionParams,
    bimatrix_to_persuasion,
    public_to_best_response,
)
from .scenarios import (
    SyntheticSpec,
    product_ads_instance,
    quality_ads_instance,
    ride_hailing_instance,
    synthetic_instance,
)

EXIT_USAGE = 1
EXIT_SPEC = 2
EXIT_IO = 3
EXIT_REFUTED = 10


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class SpecError(ValueError):
    pass


def _require(doc: dict, field: str):
    if field not in doc:
        raise SpecError(f"missing config field: {field}")
    return doc[field]


def _common_flags(p):
    p.add_argument("--seed", type=int, default=None, help="root seed; named sub-streams derive from it")
    p.add_argument("--out", required=True, help="output file or directory")
    p.add_argument("--threads", type=int, default=1, help="worker cap (recorded; execution is sequential)")
    p.add_argument("--eps", type=float, default=None, help="local-equilibrium neighborhood radius")
    p.add_argument("--tie", default="lex", choices=["lex", "sender-favoring"], help="receiver tie rule")


def build_parser() -> _Parser:
    root = _Parser(prog="persuade", description=__doc__)
    root.add_argument("--version", action="version", version=f"persuade {__version__}")
    sub = root.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a game instance")
    gsub = gen.add_subparsers(dest="kind", required=True)
    g_syn = gsub.add_parser("synthetic")
    g_syn.add_argument("--n", type=int, required=True)
    g_syn.add_argument("--states", type=int, required=True)
    g_syn.add_argument("--signals", type=int, required=True)
    g_syn.add_argument("--actions", type=int, required=True)
    g_qa = gsub.add_parser("quality-ads")
    g_qa.add_argument("--firms", type=int, required=True)
    g_qa.add_argument("--signals", type=int, default=2)
    g_qa.add_argument("--shock-std", type=float, default=1.0)
    g_pa = gsub.add_parser("product-ads")
    g_pa.add_argument("--firms", type=int, required=True)
    g_pa.add_argument("--signals", type=int, default=3)
    g_pa.add_argument("--quality-levels", type=int, default=3)
    g_pa.add_argument("--shock-std", type=float, default=1.0)
    g_rh = gsub.add_parser("ride-hailing")
    g_rh.add_argument("--m", type=int, required=True)
    g_rh.add_argument("--n", type=int, required=True)
    g_rh.add_argument("--cost-levels", type=int, default=2)
    g_rh.add_argument("--payment-based", action="store_true")
    for p in (g_syn, g_qa, g_pa, g_rh):
        _common_flags(p)

    exact = sub.add_parser("exact", help="exact solvers and checks")
    esub = exact.add_subparsers(dest="what", required=True)
    e_br = esub.add_parser("best-response")
    e_br.add_argument("--game", required=True)
    e_br.add_argument("--policy", required=True, help="joint policy file (the responder's row is ignored)")
    e_br.add_argument("--sender", type=int, required=True)
    e_ver = esub.add_parser("verify")
    e_ver.add_argument("--game", required=True)
    e_ver.add_argument("--policy", required=True)
    e_ver.add_argument("--local", action="store_true", help="sampled eps-ball check instead of exact verification")
    e_fr = esub.add_parser("full-reveal")
    e_fr.add_argument("--game", required=True)
    for p in (e_br, e_ver, e_fr):
        _common_flags(p)

    learn = sub.add_parser("learn", help="surrogate training + extra-gradient local-equilibrium search")
    learn.add_argument("--game", default=None, help="game file; defaults to the config's game/generator entry")
    learn.add_argument("--config", required=True)
    _common_flags(learn)

    reduce = sub.add_parser("reduce", help="build persuasion instances from hard source problems")
    rsub = reduce.add_subparsers(dest="kind", required=True)
    r_pub = rsub.add_parser("public")
    r_pub.add_argument("--source", required=True, help="public-persuasion JSON (k, prior, gaps, u_plus, u_minus)")
    r_pub.add_argument("--C", type=float, default=None)
    r_pub.add_argument("--N", type=float, default=None)
    r_pub.add_argument("--M", type=float, default=None)
    r_bim = rsub.add_parser("bimatrix")
    r_bim.add_argument("--source", required=True, help="bimatrix JSON (u1, u2 as nested 0/1 lists)")
    for p in (r_pub, r_bim):
        _common_flags(p)

    report = sub.add_parser("report", help="aggregate learn results into plot-ready CSVs")
    report.add_argument("--glob", required=True, dest="pattern")
    _common_flags(report)
    return root


# ---------------------------------------------------------------------------
# command bodies


def _effective_tie(args, file_tie):
    if file_tie is not None:
        return file_tie
    return parse_tie_flag(args.tie)


def _manifest(args, outputs=None):
    doc = {k: v for k, v in vars(args).items() if k != "func"}
    if outputs:
        doc["outputs"] = outputs
    write_manifest(f"{args.out}.manifest.json", args.command, doc, args.seed)


def cmd_gen(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.kind == "synthetic":
        game = synthetic_instance(SyntheticSpec(args.n, args.states, args.signals, args.actions, seed))
    elif args.kind == "quality-ads":
        game = quality_ads_instance(args.firms, seed, signals=args.signals, shock_std=args.shock_std)
    elif args.kind == "product-ads":
        game = product_ads_instance(
            args.firms, seed, signals=args.signals, quality_levels=args.quality_levels, shock_std=args.shock_std
        )
    else:
        game = ride_hailing_instance(
            args.m, args.n, seed, cost_levels=args.cost_levels, payment_based=args.payment_based
        )
    write_game(args.out, game, tie=parse_tie_flag(args.tie))
    write_sidecar(f"{args.out}.sidecar.json", game.meta or {})
    _manifest(args)
    print(f"wrote {args.out}: {game.n_senders} senders, {game.states} states, "
          f"{game.signals} signals, {game.actions} actions")
    return 0


def cmd_exact(args) -> int:
    game, file_tie = read_game(args.game)
    tie = _effective_tie(args, file_tie)
    if args.what == "best-response":
        policy = read_policies(args.policy)
        others = [policy[k] for k in range(game.n_senders) if k != args.sender]
        br = best_response_exact(game, args.sender, others, tie, incumbent=policy[args.sender])
        doc = {
            "format": "persuade-best-response",
            "sender": args.sender,
            "utility": br.utility,
            "feasible_maps": br.feasible_maps,
            "policy": br.policy.ravel().tolist(),
            "action_map": br.action_map.tolist(),
        }
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
        _manifest(args)
        print(f"best response for sender {args.sender}: utility {br.utility:.12g}")
        return 0
    if args.what == "verify":
        policy = read_policies(args.policy)
        if args.local:
            from .equilibria import local_ne_verify

            eps = 0.005 if args.eps is None else args.eps
            report = local_ne_verify(game, policy, tie, eps, 0 if args.seed is None else args.seed)
        else:
            report = verify_nash(game, policy, tie)
        write_report(args.out, report)
        _manifest(args)
        print(f"verdict: {report.verdict}; utilities {np.round(report.utilities, 6).tolist()}")
        return 0 if report.verdict != REFUTED else EXIT_REFUTED
    # full-reveal
    profile, cert = full_revelation_profile(game)
    write_policies(args.out, profile)
    write_sidecar(
        f"{args.out}.sidecar.json",
        {
            "certificate": {
                "zeta": [list(c) for c in cert.zeta],
                "assignment": {str(a): list(c) for a, c in cert.assignment.items()},
                "optimal_actions": cert.optimal_actions.tolist(),
                "capacity_note": cert.capacity_note,
            }
        },
    )
    _manifest(args)
    utilities = ex_ante_utilities(game, profile, tie)[0]
    print(f"wrote revealing profile; sender utilities {np.round(utilities, 6).tolist()}")
    return 0


def _game_from_config(cfg: dict, seed):
    """The config may point at a game file or carry a generator spec inline."""
    if "game" in cfg:
        return read_game(cfg["game"]), cfg["game"]
    gen = _require(cfg, "generator")
    kind = _require(gen, "kind")
    gseed = gen.get("seed", 0 if seed is None else seed)
    if kind == "synthetic":
        game = synthetic_instance(
            SyntheticSpec(gen["n"], gen["states"], gen["signals"], gen["actions"], gseed)
        )
    elif kind == "quality-ads":
        game = quality_ads_instance(gen["firms"], gseed, signals=gen.get("signals", 2),
                                    shock_std=gen.get("shock_std", 1.0))
    elif kind == "product-ads":
        game = product_ads_instance(gen["firms"], gseed, signals=gen.get("signals", 3),
                                    quality_levels=gen.get("quality_levels", 3),
                                    shock_std=gen.get("shock_std", 1.0))
    elif kind == "ride-hailing":
        game = ride_hailing_instance(gen["m"], gen["n"], gseed,
                                     cost_levels=gen.get("cost_levels", 2),
                                     payment_based=gen.get("payment_based", False))
    else:
        raise SpecError(f"unknown generator kind {kind!r}")
    return (game, None), f"generator:{kind}"


def cmd_learn(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    if args.game is not None:
        game, file_tie = read_game(args.game)
        game_label = args.game
    else:
        (game, file_tie), game_label = _game_from_config(cfg, args.seed)
    train_doc = dict(_require(cfg, "train"))
    eg_doc = dict(_require(cfg, "eg"))
    if args.seed is not None:
        train_doc["seed"] = args.seed
        eg_doc["seed"] = args.seed
    train_cfg = TrainConfig(**train_doc)
    eg_cfg = EgConfig(**eg_doc)
    tie = _effective_tie(args, file_tie)
    if "tie" in cfg:
        tie = parse_tie_flag(cfg["tie"])
    eps = args.eps if args.eps is not None else float(cfg.get("eps", 0.005))
    sample_count = int(cfg.get("sample_count", 50_000))
    archs = cfg.get("architectures", ["dnl"])
    arch_kwargs = {
        k: tuple(v) if isinstance(v, list) else v
        for k, v in cfg.items()
        if k in ("hidden", "lower_layers", "hyper_hidden", "aux_hidden")
    }

    os.makedirs(args.out, exist_ok=True)
    dataset = load_or_sample_dataset(game, sample_count, tie, train_cfg.seed)
    rows_out = []
    for arch in archs:
        res = find_local_ne(
            game, train_cfg, eg_cfg, tie, eps=eps, arch=arch, dataset=dataset, **arch_kwargs
        )
        table_path = os.path.join(args.out, f"restarts-{arch}.csv")
        with open(table_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["restart", "verified", "welfare"] + [f"u{j}" for j in range(game.n_senders)])
            for o in res.restarts:
                w.writerow(
                    [o.restart, "" if o.verified is None else int(o.verified), f"{o.welfare!r}"]
                    + [f"{u!r}" for u in o.utilities]
                )
        policy_path = os.path.join(args.out, f"policy-{arch}.json")
        write_policies(policy_path, res.policy)
        for j, surrogate in enumerate(res.surrogates):
            save_params(os.path.join(args.out, f"net-{arch}-sender{j}.json"), surrogate.params)
        rows_out.append(
            {
                "arch": arch,
                "verified": res.verified,
                "verdict": res.report.verdict,
                "welfare": float(res.report.utilities.sum()),
                "utilities": res.report.utilities.tolist(),
                "validation_mse": res.validation_mse,
                "eps": eps,
                "restarts_csv": table_path,
                "policy": policy_path,
                "report": report_to_dict(res.report),
                "dims": {
                    "n_senders": game.n_senders,
                    "states": game.states,
                    "signals": game.signals,
                    "actions": game.actions,
                },
            }
        )
        print(f"{arch}: verdict {res.report.verdict}, welfare {rows_out[-1]['welfare']:.6g}, "
              f"validation mse {res.validation_mse:.6g}")
    with open(os.path.join(args.out, "results.json"), "w") as fh:
        json.dump({"format": "persuade-results", "game": game_label, "rows": rows_out}, fh, indent=1)
    args_out = args.out
    args.out = os.path.join(args_out, "run")
    _manifest(args)
    args.out = args_out
    return 0


def cmd_reduce(args) -> int:
    with open(args.source) as fh:
        src = json.load(fh)
    if args.kind == "public":
        pub = PublicPersuasionInstance(
            k=_require(src, "k"),
            prior=np.asarray(_require(src, "prior"), dtype=float),
            gaps=np.asarray(_require(src, "gaps"), dtype=float),
            u_plus=np.asarray(_require(src, "u_plus"), dtype=float),
            u_minus=np.asarray(_require(src, "u_minus"), dtype=float),
        )
        if args.C is not None or args.N is not None or args.M is not None:
            if None in (args.C, args.N, args.M):
                raise SpecError("give all of --C/--N/--M or none")
            params = ReductionParams(C=args.C, N=args.N, M=args.M)
        else:
            params = ReductionParams.defaults(pub.k)
        game, pi2 = public_to_best_response(pub, params)
        write_game(args.out, game)
        write_policies(f"{args.out}.opponent-policy.json", pi2[None, :, :])
        write_sidecar(
            f"{args.out}.sidecar.json",
            {"source": args.source, "source_doc": src, "params": {"C": params.C, "N": params.N, "M": params.M}},
        )
        _manifest(args)
        print(f"wrote reduction: {game.states} states, {game.actions} actions, alphabet {game.signals}")
        return 0
    bim = BimatrixGame(u1=np.asarray(_require(src, "u1"), dtype=float), u2=np.asarray(_require(src, "u2"), dtype=float))
    game, amap = bimatrix_to_persuasion(bim)
    write_game(args.out, game, tie=amap)
    write_sidecar(f"{args.out}.sidecar.json", {"source": args.source, "source_doc": src})
    _manifest(args)
    print(f"wrote reduction: 2 states, 4 actions, alphabet {game.signals}, fixed interpretation attached")
    return 0


def _ci95(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(1.96 * arr.std(ddof=1) / math.sqrt(arr.size))


def cmd_report(args) -> int:
    paths = sorted(globmod.glob(args.pattern))
    if not paths:
        raise SpecError(f"no result files match {args.pattern!r}")
    rows = []
    for path in paths:
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != "persuade-results":
            continue
        rows.extend(doc["rows"])
    if not rows:
        raise SpecError("matched files contain no result rows")

    def write_groups(path, keyfunc, keynames):
        groups: dict = {}
        for row in rows:
            groups.setdefault(keyfunc(row), []).append(row)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(keynames) + ["count", "mse_mean", "mse_ci95", "welfare_mean", "welfare_ci95"])
            for key in sorted(groups):
                grp = groups[key]
                mse_m, mse_c = _ci95([g["validation_mse"] for g in grp])
                wf_m, wf_c = _ci95([g["welfare"] for g in grp])
                w.writerow(list(key) + [len(grp), repr(mse_m), repr(mse_c), repr(wf_m), repr(wf_c)])

    write_groups(
        args.out,
        lambda r: (
            r["dims"]["n_senders"],
            r["dims"]["states"],
            r["dims"]["signals"],
            r["dims"]["actions"],
            r["arch"],
        ),
        ["n_senders", "states", "signals", "actions", "arch"],
    )
    for axis in ("states", "signals", "actions"):
        write_groups(
            f"{args.out}.by-{axis}.csv",
            lambda r, a=axis: (r["dims"][a], r["arch"]),
            [axis, "arch"],
        )
    _manifest(args)
    print(f"aggregated {len(rows)} rows from {len(paths)} files into {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            code = cmd_gen(args)
        elif args.command == "exact":
            code = cmd_exact(args)
        elif args.command == "learn":
            code = cmd_learn(args)
        elif args.command == "reduce":
            code = cmd_reduce(args)
        else:
            code = cmd_report(args)
    except (SpecError, PreconditionError, CapError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
