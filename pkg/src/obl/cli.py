"""Command-line entry point: ``obl <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 enumeration budget exceeded.

Every run writes into ``--out`` using the layout policies/, beliefs/,
reports/, curves/ plus a manifest.json listing inputs, outputs and seeds.
All randomness derives from ``--seed`` through :func:`obl.io.derive_seed`.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .belief import (
    BeliefMismatchError,
    LearnedBeliefModel,
    NoSupportError,
    UnreachableHistoryError,
    exact_belief,
    fit_count_belief,
    grounded_belief,
)
from .env.base import Aoh, InvalidConfigError
from .env.config import EnvironmentConfig, build_env, load_config
from .env.matrix import SimultaneousGame, convert_simultaneous
from .env.tree import DEFAULT_BUDGET, BudgetExceededError
from .harness import SUITES, crossplay, grounded_play_report, verify
from .harness.crossplay import ConfigMismatchError
from .harness.grounded import UnsupportedEnvError
from .io import RunManifest, derive_seed, prepare_out
from .learner import LearnerConfig, lb_obl_train, q_obl_train
from .policy import FormatError, Policy, QTable, policy_distance
from .solver import (
    SelfPlayConfig,
    SolverSettings,
    cross_value,
    get_tree,
    k_level_hierarchy,
    obl_hierarchy,
    obl_operator,
    policy_value,
    selfplay_train,
)

log = logging.getLogger("obl")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _config(args) -> dict:
    data = load_config(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "env", None):
        data = {**data, "env": args.env}
        if args.env == "mini_hanabi" and getattr(args, "preset", None):
            data["preset"] = args.preset
    if "env" not in data:
        raise UsageError("give --env or a --config file with an 'env' key")
    return data


def _env(data: dict):
    cfg = EnvironmentConfig.from_mapping(data)
    env = build_env(cfg)
    if isinstance(env, SimultaneousGame):
        env = convert_simultaneous(env, cfg.params.get("order"))
    return env


def _section(data: dict, name: str) -> dict:
    sec = data.get(name) or {}
    if not isinstance(sec, dict):
        raise InvalidConfigError(f"'{name}' must be a mapping", name)
    return dict(sec)


def _load_policy(path: str, manifest: RunManifest | None = None) -> Policy:
    pol = Policy.load(path)
    pol.metadata.setdefault("label", Path(path).stem)
    if manifest is not None:
        manifest.add_input(path)
    return pol


def _pi0(args, manifest) -> Policy:
    src = getattr(args, "pi0", None) or "uniform"
    if src == "uniform":
        return Policy.uniform()
    return _load_policy(src, manifest)


def _save_policy(root: Path, manifest: RunManifest, pol: Policy, name: str) -> Path:
    path = root / "policies" / f"{name}.json"
    pol.save(path)
    manifest.add_output(root, path)
    return path


def _save_q(root: Path, manifest: RunManifest, q: QTable, name: str) -> Path:
    path = root / "policies" / f"{name}.q.json"
    q.save(path)
    manifest.add_output(root, path)
    return path


def _write_json(root: Path, manifest: RunManifest, rel: str, data) -> Path:
    path = root / rel
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str))
    manifest.add_output(root, path)
    return path


def _tree_or_none(env, budget=200_000):
    try:
        return get_tree(env, budget=budget)
    except BudgetExceededError:
        return None


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    data = _config(args)
    env = _env(data)
    solver = _section(data, "solver")
    T = args.T if args.T is not None else float(solver.get("temperature", 0.0))
    levels = args.levels if args.levels is not None else int(solver.get("levels", 1))
    root = prepare_out(args.out)
    man = RunManifest("solve", sys.argv[1:], env.config_hash(), {"seed": args.seed})
    settings = SolverSettings(temperature=T, budget=args.budget)
    pi0 = _pi0(args, man)
    tree = get_tree(env, budget=args.budget)
    results = obl_hierarchy(env, pi0, settings, levels, tree)
    rows = []
    for k, (pi, q) in enumerate(results, start=1):
        _save_policy(root, man, pi, f"obl-level{k}")
        _save_q(root, man, q, f"obl-level{k}")
        J = policy_value(env, pi, tree)[0]
        rows.append({"level": k, "J": J, "aohs": len(pi), "ties": pi.metadata.get("ties", 0)})
    _write_json(root, man, "reports/solve.json", {"env": env.name, "temperature": T, "levels": rows})
    print(f"env={env.name} T={T} AOHs={len(tree.groups)}")
    print(f"{'level':>5} {'J (SP)':>12} {'ties':>6}")
    for r in rows:
        print(f"{r['level']:>5} {r['J']:>12.6f} {r['ties']:>6}")
    if results and len(tree.groups) <= 16:
        pi = results[0][0]
        for h in tree.topological_order()[::-1]:
            acts = {env.action_name(a, h.player): round(p, 6) for a, p in pi.table[h].items()}
            print(f"  player {h.player} t={h.t} {h.items!r}: {acts}")
    man.write(root)
    return EXIT_OK


def _warm(args, level: int, mode: str, man: RunManifest):
    """(pi0, Q init) from a previous level's output directory."""
    if not args.warm_start:
        return None, None
    pdir = Path(args.warm_start) / "policies"
    if not pdir.is_dir():
        pdir = Path(args.warm_start)
    cands = sorted(pdir.glob(f"*level{level - 1}.json"))
    if not cands:
        raise UsageError(f"no level-{level - 1} policy under {args.warm_start}")
    pol = _load_policy(str(cands[0]), man)
    qpath = cands[0].with_suffix(".q.json")
    q = None
    if qpath.exists():
        q = QTable.load(qpath)
        man.add_input(qpath)
    man.extra["lineage"] = {"parent_policy": str(cands[0]), "parent_digest": pol.digest()}
    return pol, q


def cmd_train(args) -> int:
    data = _config(args)
    env = _env(data)
    cfg_data = _section(data, "learner")
    if args.episodes is not None:
        cfg_data["episodes"] = args.episodes
    seed = derive_seed(args.seed, "train", args.mode, args.level)
    cfg_data["seed"] = seed
    cfg = LearnerConfig.from_mapping(cfg_data)
    root = prepare_out(args.out)
    man = RunManifest("train", sys.argv[1:], env.config_hash(), {"seed": args.seed, "learner": seed})
    warm_pi, warm_q = _warm(args, args.level, args.mode, man)
    if args.pi0:
        pi0 = _pi0(args, man)
    elif warm_pi is not None:
        pi0 = warm_pi
    elif args.level == 1:
        pi0 = Policy.uniform()
    else:
        raise UsageError("level > 1 needs --warm-start or --pi0")
    tree = _tree_or_none(env)
    oracle = obl_operator(env, pi0, SolverSettings(), tree)[0] if tree is not None else None
    label = f"{args.mode}-level{args.level}"
    if args.mode == "lbobl":
        if args.belief:
            belief = LearnedBeliefModel.load(args.belief, env)
            man.add_input(args.belief)
            if belief.pi0_hash != pi0.digest():
                raise BeliefMismatchError("belief file was fitted for a different pi0")
        else:
            b_eps = args.belief_episodes or int(_section(data, "belief").get("episodes", cfg.episodes))
            alpha = float(_section(data, "belief").get("alpha", 1.0))
            b_seed = derive_seed(args.seed, "belief", args.level)
            man.seeds["belief"] = b_seed
            belief = fit_count_belief(env, pi0, b_eps, alpha, b_seed, jobs=args.jobs)
            bpath = root / "beliefs" / f"belief-level{args.level}.json"
            belief.save(bpath)
            man.add_output(root, bpath)
        res = lb_obl_train(env, belief, cfg, oracle=oracle, init=warm_q, label=label)
    else:
        res = q_obl_train(env, pi0, cfg, oracle=oracle, init=warm_q, label=label)
    res.policy.metadata["level"] = args.level
    _save_policy(root, man, res.policy, label)
    _save_q(root, man, res.q, label)
    cpath = root / "curves" / f"{label}.csv"
    with open(cpath, "w", newline="") as fh:
        cols = ["episode", "sp_score"] + (["oracle_distance"] if oracle is not None else [])
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(res.curve)
    man.add_output(root, cpath)
    _write_json(root, man, f"reports/{label}-run.json", {"stats": res.stats, "visited_aohs": len(res.visits)})
    if tree is not None:
        J = policy_value(env, res.policy, tree)[0]
        print(f"{label}: SP value {J:.6f} (exact)")
        if oracle is not None:
            freq = [h for h, v in res.visits.items() if v >= 1000]
            legal = {h: tree.nodes[tree.groups[h][0]].legal for h in freq}
            print(f"oracle distance on {len(freq)} AOHs with >=1000 visits: "
                  f"{policy_distance(res.policy, oracle, freq, legal):.4f}")
    elif res.curve:
        print(f"{label}: SP score {res.curve[-1]['sp_score']:.4f} (sampled)")
    print(f"mean replay reuse {res.stats['mean_reuse']:.2f}")
    man.write(root)
    return EXIT_OK


def cmd_baseline(args) -> int:
    data = _config(args)
    env = _env(data)
    root = prepare_out(args.out)
    man = RunManifest("baseline", sys.argv[1:], env.config_hash(), {"seed": args.seed})
    pols = []
    if args.kind == "sp":
        cfg = _section(data, "selfplay")
        if args.episodes is not None:
            cfg["episodes"] = args.episodes
        cfg = SelfPlayConfig.from_mapping(cfg)
        for k in range(args.seeds):
            s = derive_seed(args.seed, "selfplay", k)
            man.seeds[f"selfplay-{k}"] = s
            pi = selfplay_train(env, s, cfg)
            pols.append(pi)
            _save_policy(root, man, pi, f"selfplay-{k}")
    else:
        tree = get_tree(env, budget=args.budget)
        for k in range(args.seeds):
            s = derive_seed(args.seed, "ch", k)
            man.seeds[f"ch-{k}"] = s
            hier = k_level_hierarchy(env, Policy.uniform(), args.levels, tree, tie_break="random", seed=s)
            for lv, pi in enumerate(hier, start=1):
                _save_policy(root, man, pi, f"ch-{k}-level{lv}")
            pols.append(hier[-1])
    tree = _tree_or_none(env)
    if tree is not None and pols:
        m = crossplay(env, pols, "exact", labels=[f"{args.kind}{k}" for k in range(len(pols))], tree=tree)
        p = root / "reports" / "crossplay.csv"
        m.save_csv(p)
        man.add_output(root, p)
        print(m.render())
    man.write(root)
    return EXIT_OK


def cmd_eval(args) -> int:
    data = _config(args)
    env = _env(data)
    root = prepare_out(args.out)
    man = RunManifest("eval", sys.argv[1:], env.config_hash(), {"seed": args.seed})
    pols = [_load_policy(p, man) for p in args.policies]
    labels = [Path(p).stem for p in args.policies]
    if args.grounded_report:
        rep = None
        for pol, lab in zip(pols, labels):
            r = grounded_play_report(env, pol, args.episodes or 10_000, derive_seed(args.seed, "grounded"), lab)
            rep = r if rep is None else rep.merge(r)
        p = root / "reports" / "grounded.json"
        rep.save(p)
        man.add_output(root, p)
        print(rep.render())
        man.write(root)
        return EXIT_OK
    if args.exact or not args.episodes:
        m = crossplay(env, pols, "exact", labels=labels)
    else:
        m = crossplay(env, pols, "sampled", args.episodes, derive_seed(args.seed, "crossplay"), labels)
    for ext, fn in (("csv", m.save_csv), ("json", m.save_json)):
        p = root / "reports" / f"crossplay.{ext}"
        fn(p)
        man.add_output(root, p)
    print(m.render())
    man.write(root)
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = list(SUITES) if "all" in args.suites else args.suites
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise UsageError(f"unknown suite(s) {bad}; choose from {', '.join(SUITES)} or all")
    root = prepare_out(args.out)
    man = RunManifest("verify", sys.argv[1:], None, {"seed": args.seed})
    ok = True
    for s in suites:
        rep = verify(s, seed=args.seed)
        p = root / "reports" / f"verify-{s}.json"
        rep.save(p)
        man.add_output(root, p)
        print(rep.line())
        ok &= rep.passed
    man.write(root)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_belief(args) -> int:
    data = _config(args)
    env = _env(data)
    aohs = []
    if args.aoh:
        aohs = [Aoh.from_key(k) for k in args.aoh]
    else:
        tree = get_tree(env, budget=args.budget)
        aohs = tree.topological_order()[::-1]
        if args.player is not None:
            aohs = [h for h in aohs if h.player == args.player]
    out = []
    if args.belief:
        model = LearnedBeliefModel.load(args.belief, env)
        for h in aohs:
            out.append(model.distribution(h).to_json())
    else:
        pi0 = Policy.uniform() if not args.pi0 or args.pi0 == "uniform" else Policy.load(args.pi0)
        for h in aohs:
            dist = grounded_belief(env, h) if args.grounded else exact_belief(env, pi0, h, tremble=args.tremble)
            out.append(dist.to_json())
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_diff(args) -> int:
    a, b = Policy.load(args.a), Policy.load(args.b)
    d = policy_distance(a, b)
    worst = max(((h, policy_distance(a, b, [h])) for h in set(a.table) | set(b.table)),
                key=lambda x: x[1], default=(None, 0.0))
    print(json.dumps({"max_tv": d, "aohs": len(set(a.table) | set(b.table)),
                      "worst_aoh": worst[0].key() if worst[0] is not None else None}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obl", description="Off-belief learning toolkit for small Dec-POMDPs.")
    p.add_argument("--version", action="version", version=f"obl {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, env=True, out=True):
        if env:
            sp.add_argument("--env", choices=["toy_game", "matrix_coord", "mini_hanabi"])
            sp.add_argument("--config", help="YAML config file")
            sp.add_argument("--preset", choices=["micro", "default"], help="mini_hanabi preset")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
        if out:
            sp.add_argument("--out", default="runs/latest")

    sp = sub.add_parser("solve", help="exact OBL hierarchy")
    common(sp)
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--levels", type=int, default=None)
    sp.add_argument("--pi0", default="uniform", help="'uniform' or a policy file")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("train", help="sampled OBL (Q-OBL or LB-OBL)")
    common(sp)
    sp.add_argument("--mode", choices=["qobl", "lbobl"], default="lbobl")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--episodes", type=int, default=None)
    sp.add_argument("--belief-episodes", type=int, default=None)
    sp.add_argument("--belief", help="load a fitted belief instead of fitting one")
    sp.add_argument("--pi0", default=None)
    sp.add_argument("--warm-start", default=None, help="output dir of the previous level")
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("baseline", help="self-play (IQL) or cognitive-hierarchy baselines")
    common(sp)
    sp.add_argument("--kind", choices=["sp", "ch"], default="sp")
    sp.add_argument("--seeds", type=int, default=10)
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--episodes", type=int, default=None)
    sp.set_defaults(fn=cmd_baseline)

    sp = sub.add_parser("eval", help="cross-play matrix or grounded-play report")
    common(sp)
    sp.add_argument("policies", nargs="+")
    sp.add_argument("--exact", action="store_true")
    sp.add_argument("--episodes", type=int, default=None)
    sp.add_argument("--mode", choices=["crossplay", "grounded"], default="crossplay")
    sp.add_argument("--grounded-report", action="store_true")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("verify", help="theorem and lemma suites")
    common(sp, env=False)
    sp.add_argument("suites", nargs="+", help=f"any of {', '.join(SUITES)} or all")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("belief", help="print beliefs as JSON")
    common(sp, out=False)
    sp.add_argument("--aoh", action="append", help="hex AOH key (repeatable); default: every acting AOH")
    sp.add_argument("--player", type=int, default=None)
    sp.add_argument("--belief", help="learned belief file")
    sp.add_argument("--pi0", default=None)
    sp.add_argument("--grounded", action="store_true")
    sp.add_argument("--tremble", action="store_true")
    sp.set_defaults(fn=cmd_belief)

    sp = sub.add_parser("diff", help="max per-AOH total variation between two policy files")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(fn=cmd_diff)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "mode", None) == "grounded":
        args.grounded_report = True
    try:
        return args.fn(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvalidConfigError as exc:
        print(f"error: invalid config (key: {exc.key}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, FormatError, BeliefMismatchError, ConfigMismatchError, UnsupportedEnvError,
            UnreachableHistoryError, NoSupportError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
