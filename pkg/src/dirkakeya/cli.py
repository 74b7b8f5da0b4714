"""Command-line entry point: ``dirkakeya <subcommand> [options]``.

Exit codes: 0 success, 1 bad input, 2 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from fractions import Fraction
from pathlib import Path

from .dyadic_tree import GeneratorSpec, TreeError, build_tree
from .experiments import (
    area_table,
    cover_rows,
    derive_seed,
    probe_points,
    scaling_study,
    scaling_table,
    summarize,
    summary_table,
    write_csv,
)
from .geometry import build_family, render_svg
from .maximal import (
    DirectionSet,
    RasterImage,
    empirical_norm,
    kakeya_pair,
    maximal_transform,
    norm_lower_bound,
    trial_suite,
    witness_masks,
)
from .percolation import PercTree, complete_tree, lyons_check, ray_tree, resistance, survival_exact, survival_mc
from .structure import lacunary_order, prune, split_numbers
from .sticky import sample_sticky

OUT_ENV = "DIRKAKEYA_OUT"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        return json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise InputError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def _spec(cfg: dict, key: str = "generator") -> GeneratorSpec:
    data = cfg.get(key, cfg)
    if not isinstance(data, dict) or "kind" not in data:
        raise InputError(f"config needs a generator spec under {key!r} (with a 'kind')")
    return GeneratorSpec.from_dict(data)


def cmd_tree(args) -> int:
    cfg = _load_config(args)
    tree = build_tree(_spec(cfg))
    splits = split_numbers(tree)
    pruned = prune(tree)
    decomp = lacunary_order(tree)
    report = {
        "split": splits.tree_split,
        "order": decomp.order,
        "spine": decomp.spine,
        "height": pruned.height,
        "leaves": len(tree.leaves),
        "generations": [list(g) for g in pruned.generations],
    }
    print(json.dumps(report, sort_keys=True))
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        _write(out / "tree.json", tree.to_json() + "\n")
        _write(out / "report.json", json.dumps(report, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_kakeya_scaling(args) -> int:
    cfg = _load_config(args)
    ns = cfg.get("N", [4, 5, 6])
    seeds = int(cfg.get("seeds", 8))
    if not ns or seeds < 1:
        raise InputError("N range must be nonempty and seeds >= 1")
    method = args.method or cfg.get("method", "auto")
    rows = scaling_study(cfg.get("target", "full"), ns, seeds, args.seed, method,
                         cfg.get("pattern", "branch,keep-left"), int(cfg.get("workers", 1)))
    out = _out_dir(args)
    _write(out / "areas.csv", area_table(rows))
    _write(out / "scaling.csv", scaling_table(rows))
    _write(out / "summary.csv", summary_table(summarize(rows)))
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"row N={r.N} seed={r.seed} failed: {r.error}", file=sys.stderr)
    return 0


def _perc_tree(item: dict) -> tuple[str, PercTree, int]:
    kind = item.get("kind")
    n = int(item.get("N", item.get("depth", 0)))
    if kind == "complete":
        return f"complete-{n}", complete_tree(n), n
    if kind == "ray":
        return f"ray-{n}", ray_tree(n, item.get("bits")), n
    if kind == "vertices":
        return item.get("id", f"vertices-{n}"), PercTree.from_vertices(item["vertices"], n), n
    raise InputError(f"unknown percolation tree kind {kind!r}")


def cmd_percolation(args) -> int:
    cfg = _load_config(args)
    trees = cfg.get("trees", [{"kind": "complete", "N": n} for n in range(1, 5)])
    trials = args.trials or int(cfg.get("trials", 10_000))
    rows = []
    for i, item in enumerate(trees):
        tid, tree, n = _perc_tree(item)
        p = survival_exact(tree)
        R = resistance(tree)
        ly = lyons_check(tree)
        seed = derive_seed(args.seed, i)
        mc = survival_mc(tree, trials, seed)
        r_num, r_den = ("inf", "1") if R == float("inf") else (R.numerator, R.denominator)
        rows.append([tid, n, len(tree.edges()), p.numerator, p.denominator, r_num, r_den, str(ly.bound),
                     "pass" if ly.passed else "FAIL", repr(mc.estimate), repr(mc.stderr), trials, seed])
    out = _out_dir(args)
    _write(out / "percolation.csv", write_csv(
        "percolation",
        ["tree_id", "N", "edges", "p_exact_num", "p_exact_den", "R_num", "R_den", "bound", "lyons",
         "mc_estimate", "mc_stderr", "trials", "seed"], rows))
    return 0


def cmd_coverprob(args) -> int:
    cfg = _load_config(args)
    spec = _spec(cfg, "target")
    if "points" in cfg:
        points = [(Fraction(str(x)), Fraction(str(y))) for x, y in cfg["points"]]
    else:
        points = probe_points(int(cfg.get("probes", 10)), args.seed)
    trials = args.trials or int(cfg.get("trials", 10_000))
    rows = cover_rows(spec.to_dict(), points, trials, args.seed)
    out = _out_dir(args)
    _write(out / "coverprob.csv", write_csv(
        "coverprob", ["probe", "x", "y", "exact", "exact_float", "mc_estimate", "mc_stderr", "trials", "seed"],
        rows))
    return 0


def cmd_maxop(args) -> int:
    cfg = _load_config(args)
    m = int(cfg.get("m", 6))
    ps = [float(p) for p in cfg.get("p", [2])]
    if "slopes" in cfg:
        omega = DirectionSet(tuple(Fraction(str(s)) for s in cfg["slopes"]))
        oid = cfg.get("omega_id", "slopes")
    else:
        spec = _spec(cfg, "omega")
        omega = DirectionSet.from_tree(build_tree(spec))
        oid = cfg.get("omega_id", f"{spec.kind}-{spec.depth}")
    out = _out_dir(args)
    rows = []
    if "image" in cfg:
        img = RasterImage.load(cfg["image"])
        res = maximal_transform(img, omega)
        res.save(out / "maximal.bin")
        _write(out / "maximal.csv", res.to_csv())
        m = img.m
    images = trial_suite(m, int(cfg.get("images", 20)), args.seed)
    for p in ps:
        st = empirical_norm(omega, p, images)
        rows.append([oid, omega.split, p, m, repr(st.value), "empirical"])
    kk = cfg.get("kakeya")
    if kk:
        n = int(kk.get("N", 4))
        target = prune(build_tree({"kind": "full", "depth": n}))
        best = None
        for i in range(int(kk.get("seeds", 8))):
            fam = build_family(sample_sticky(target, derive_seed(args.seed, n, i)))
            E, Es = kakeya_pair(fam, m)
            score = Es.support_size() / max(E.support_size(), 1)
            if best is None or score > best[0]:
                best = (score, fam, E, Es)
        _, fam, E, Es = best
        wit = witness_masks(fam, m, (0.0, 1.0))
        for p in ps:
            nb = norm_lower_bound(E, Es, DirectionSet(tuple(fam.slopes())), p, witnesses=wit)
            rows.append([f"kakeya-full-{n}", n, p, m, repr(nb.bound), "kakeya_lower_bound"])
    _write(out / "norms.csv", write_csv("norms", ["omega_id", "N", "p", "m", "stat", "kind"], rows))
    return 0


def cmd_render(args) -> int:
    cfg = _load_config(args)
    target = prune(build_tree(_spec(cfg, "target")))
    seed = args.seed if "seed" not in cfg else int(cfg["seed"])
    sigma = sample_sticky(target, seed)
    if sigma.depth > 8:
        raise InputError(f"family depth {sigma.depth} too large to render; use a target of height <= 8")
    svg = render_svg(build_family(sigma), int(cfg.get("strips", 3)))
    out = Path(args.out) if args.out and args.out.endswith(".svg") else _out_dir(args) / "family.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, svg)
    if cfg.get("write_map"):
        _write(out.with_suffix(".json"), sigma.to_json() + "\n")
    return 0


COMMANDS = {
    "tree": (cmd_tree, "analyse a generated direction tree"),
    "kakeya-scaling": (cmd_kakeya_scaling, "strip areas and overlaps of random sticky families"),
    "percolation": (cmd_percolation, "survival, resistance and the Lyons bound on trees"),
    "coverprob": (cmd_coverprob, "exact and sampled coverage probability at probe points"),
    "maxop": (cmd_maxop, "empirical norms of the directional maximal operator"),
    "render": (cmd_render, "SVG of a sampled parallelogram family"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirkakeya", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", help=f"output directory (or .svg path for render); default ${OUT_ENV} or ./out")
        p.add_argument("--method", choices=["auto", "exact", "sampled"], help="strip area method")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.trials is not None and args.trials < 1:
        print("dirkakeya: error: --trials must be at least 1", file=sys.stderr)
        return 1
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (InputError, TreeError, ValueError, KeyError, OSError) as exc:
        print(f"dirkakeya: error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
