"""Operator command line for scenario management, training, and evaluation.

Subcommands:

* ``scenario generate|validate|add-honeyfiles`` builds and checks network
  scenario files.
* ``train`` runs PPO on a scenario and writes a checkpoint, a learning
  curve CSV, and a run manifest.
* ``eval`` rolls a frozen checkpoint, writing an aggregate report, a
  host-frequency ranking, and per-episode attack path exports.
* ``compare`` lines up aggregate reports side by side with deltas.

Exit codes: 0 success, 1 operational error, 2 validation findings.  The
``RANSOMSIM_SEED`` environment variable supplies the seed when ``--seed``
is omitted.  Every command records a run manifest (command line, seed,
scenario hash, outputs) so a run can be reproduced byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from typing import List, Optional, Sequence, Tuple

from . import __version__
from . import evaluation as ev
from . import nets
from . import trainer as tr
from . import scenario as scen

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FINDINGS = 2


def resolve_seed(value: Optional[int]) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("RANSOMSIM_SEED", "").strip()
    return int(env) if env else 0


def _tag(cfg: scen.ScenarioConfig, seed: int) -> str:
    return f"{scen.scenario_hash(cfg)[:8]}_seed{seed}_rho{cfg.rho:g}"


def _write_manifest(path: str, command: str, argv: Sequence[str], seed: Optional[int],
                    cfg: Optional[scen.ScenarioConfig], config: dict,
                    outputs: Sequence[str]) -> None:
    doc = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "seed": seed,
        "scenario_hash": scen.scenario_hash(cfg) if cfg is not None else None,
        "config": config,
        "outputs": sorted(str(p) for p in outputs),
        "written_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_host_list(text: str) -> List[Tuple[int, int]]:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            s, l = chunk.split(":")
            out.append((int(s), int(l)))
        except ValueError:
            raise ValueError(f"bad host address {chunk!r}, expected subnet:local")
    if not out:
        raise ValueError("empty host list")
    return out


# -- deterministic SVG charts -------------------------------------------------
# A tiny hand-rolled emitter: identical inputs give identical bytes, which
# external plotting libraries do not guarantee (embedded creation dates).

_SVG_STYLE = (
    "text{font-family:monospace;font-size:12px;fill:#333}"
    ".title{font-size:15px}"
    ".axis{stroke:#333;stroke-width:1}"
    ".grid{stroke:#ddd;stroke-width:1}"
)


def _ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def svg_line_chart(xs: Sequence[float], ys: Sequence[float], title: str,
                   x_label: str, y_label: str,
                   width: int = 860, height: int = 480) -> str:
    ml, mr, mt, mb = 80, 20, 45, 55
    iw, ih = width - ml - mr, height - mt - mb
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return ml + iw * (x - x_lo) / (x_hi - x_lo)

    def py(y):
        return mt + ih * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<style>{_SVG_STYLE}</style>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text class="title" x="{width / 2:.1f}" y="24" text-anchor="middle">{title}</text>',
    ]
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        parts.append(f'<line class="grid" x1="{ml}" y1="{y:.2f}" x2="{ml + iw}" y2="{y:.2f}"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        parts.append(
            f'<text x="{x:.2f}" y="{mt + ih + 18}" text-anchor="middle">{t:.4g}</text>'
        )
    parts.append(f'<line class="axis" x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ih}"/>')
    parts.append(
        f'<line class="axis" x1="{ml}" y1="{mt + ih}" x2="{ml + iw}" y2="{mt + ih}"/>'
    )
    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline fill="none" stroke="#1f6f8b" stroke-width="1.5" points="{pts}"/>')
    parts.append(
        f'<text x="{ml + iw / 2:.1f}" y="{height - 12}" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{mt + ih / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {mt + ih / 2:.1f})">{y_label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_bar_chart(labels: Sequence[str], values: Sequence[float], title: str,
                  y_label: str, width: int = 860, height: int = 480) -> str:
    ml, mr, mt, mb = 80, 20, 45, 90
    iw, ih = width - ml - mr, height - mt - mb
    v_hi = max(values) if values and max(values) > 0 else 1.0
    n = max(len(values), 1)
    slot = iw / n
    bar_w = slot * 0.7
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<style>{_SVG_STYLE}</style>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text class="title" x="{width / 2:.1f}" y="24" text-anchor="middle">{title}</text>',
    ]
    for t in _ticks(0.0, v_hi):
        y = mt + ih * (1.0 - t / v_hi)
        parts.append(f'<line class="grid" x1="{ml}" y1="{y:.2f}" x2="{ml + iw}" y2="{y:.2f}"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    for i, (lab, val) in enumerate(zip(labels, values)):
        x = ml + slot * i + (slot - bar_w) / 2
        h = ih * (val / v_hi)
        y = mt + ih - h
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{h:.2f}" '
            f'fill="#1f6f8b"/>'
        )
        cx = ml + slot * (i + 0.5)
        ty = mt + ih + 14
        parts.append(
            f'<text x="{cx:.2f}" y="{ty}" text-anchor="end" '
            f'transform="rotate(-45 {cx:.2f} {ty})">{lab}</text>'
        )
    parts.append(f'<line class="axis" x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ih}"/>')
    parts.append(
        f'<line class="axis" x1="{ml}" y1="{mt + ih}" x2="{ml + iw}" y2="{mt + ih}"/>'
    )
    parts.append(
        f'<text x="18" y="{mt + ih / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {mt + ih / 2:.1f})">{y_label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- subcommand handlers -------------------------------------------------------


def cmd_scenario_generate(args, argv) -> int:
    seed = resolve_seed(args.seed)
    cfg = scen.generate_paper_scale(seed) if args.paper_scale else scen.generate_desk_scale(seed)
    scen.save_scenario(cfg, args.output)
    manifest = args.output + ".manifest.json"
    _write_manifest(manifest, "scenario generate", argv, seed, cfg,
                    {"paper_scale": args.paper_scale}, [args.output])
    print(
        f"wrote {args.output}: {len(cfg.hosts)} hosts, {len(cfg.subnets)} subnets, "
        f"{len(cfg.exploits)} exploits"
    )
    return EXIT_OK


def cmd_scenario_validate(args, argv) -> int:
    cfg = scen.load_scenario(args.path, validate=False)
    report = scen.validate_scenario(cfg)
    print(report.summary())
    for finding in report.errors:
        print(f"  error [{finding.field}]: {finding.message}")
    for finding in report.warnings:
        print(f"  warning [{finding.field}]: {finding.message}")
    return EXIT_OK if report.ok else EXIT_FINDINGS


def cmd_scenario_add_honeyfiles(args, argv) -> int:
    cfg = scen.load_scenario(args.path)
    addrs = _parse_host_list(args.hosts)
    before = sum(1 for h in cfg.hosts if h.has_honeyfiles)
    new_cfg = scen.add_honeyfiles(cfg, addrs)
    after = sum(1 for h in new_cfg.hosts if h.has_honeyfiles)
    out = args.output or args.path
    scen.save_scenario(new_cfg, out)
    _write_manifest(out + ".manifest.json", "scenario add-honeyfiles", argv, None,
                    new_cfg, {"hosts": args.hosts}, [out])
    print(f"wrote {out}: {after - before} placements added ({after} hosts honeyfiled)")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    seed = resolve_seed(args.seed)
    cfg = scen.load_scenario(args.scenario)
    if args.rho is not None:
        cfg = dataclasses.replace(cfg, rho=args.rho)
    ppo = tr.PPOConfig(
        total_episodes=args.episodes,
        seed=seed,
        workers=args.workers,
        checkpoint_every=args.checkpoint_every,
    )
    os.makedirs(args.out, exist_ok=True)
    tag = _tag(cfg, seed)
    curve_path = os.path.join(args.out, f"curve_{tag}.csv")

    def progress(info):
        print(
            f"iter {info['iteration']:>4}  episodes {info['episodes']:>5}  "
            f"recent_reward {info['recent_reward']:>9.1f}  "
            f"entropy {info['entropy']:.3f}  clip {info['clip_fraction']:.3f}",
            flush=True,
        )

    result = tr.train(
        cfg, ppo, out_dir=args.out, curve_path=curve_path,
        resume=args.resume, progress=progress if not args.quiet else None,
    )
    outputs = [curve_path, os.path.join(args.out, "checkpoint.npz")]
    if args.svg:
        svg_path = os.path.join(args.out, f"curve_{tag}.svg")
        xs = [float(r.episode) for r in result.curve]
        ys = [float(r.reward) for r in result.curve]
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(svg_line_chart(xs, ys, f"episode reward (rho={cfg.rho:g})",
                                    "episode", "reward"))
        outputs.append(svg_path)
    _write_manifest(
        os.path.join(args.out, f"manifest_train_{tag}.json"), "train", argv, seed, cfg,
        {"episodes": args.episodes, "rho": cfg.rho, "workers": args.workers,
         "resume": args.resume}, outputs,
    )
    print(
        f"trained {result.episodes} episodes over {result.iterations} iterations; "
        f"checkpoint and curve in {args.out}"
    )
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    seed = resolve_seed(args.seed)
    cfg = scen.load_scenario(args.scenario)
    if args.rho is not None:
        cfg = dataclasses.replace(cfg, rho=args.rho)
    params, _, meta = nets.load_checkpoint(args.checkpoint)
    trained_hash = str(meta.get("scenario_hash", ""))
    if trained_hash and trained_hash != scen.scenario_hash(cfg):
        print(
            "warning: checkpoint was trained on a different scenario configuration",
            file=sys.stderr,
        )
    trajectories = ev.rollout_policy(cfg, params, args.episodes, mode=args.mode, seed=seed)
    label = args.label or f"rho{cfg.rho:g}"
    report = ev.aggregate(trajectories, scenario=cfg, label=label)
    os.makedirs(args.out, exist_ok=True)
    tag = _tag(cfg, seed)

    report_path = os.path.join(args.out, f"report_{tag}.json")
    ev.save_report(report_path, report)
    outputs = [report_path]

    ranking = ev.host_frequency_ranking(report, args.top_k)
    ranking_path = os.path.join(args.out, f"ranking_{tag}.csv")
    with open(ranking_path, "w", encoding="utf-8") as fh:
        fh.write("rank,target,frequency\n")
        for i, (addr, freq) in enumerate(ranking, start=1):
            fh.write(f'{i},"({addr[0]},{addr[1]})",{freq!r}\n')
    outputs.append(ranking_path)

    paths_dir = os.path.join(args.out, f"paths_{tag}")
    os.makedirs(paths_dir, exist_ok=True)
    pad = max(3, len(str(len(trajectories))))
    for i, traj in enumerate(trajectories, start=1):
        path_file = os.path.join(paths_dir, f"episode_{i:0{pad}d}.csv")
        with open(path_file, "w", encoding="utf-8") as fh:
            fh.write(ev.export_path(traj, "csv"))
        outputs.append(path_file)

    if args.svg:
        svg_path = os.path.join(args.out, f"ranking_{tag}.svg")
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(svg_bar_chart(
                [f"({a[0]},{a[1]})" for a, _ in ranking],
                [f_ for _, f_ in ranking],
                f"top {len(ranking)} encrypted hosts ({label})",
                "episode fraction",
            ))
        outputs.append(svg_path)

    _write_manifest(
        os.path.join(args.out, f"manifest_eval_{tag}.json"), "eval", argv, seed, cfg,
        {"episodes": args.episodes, "top_k": args.top_k, "mode": args.mode,
         "checkpoint": args.checkpoint, "label": label}, outputs,
    )
    print(
        f"evaluated {report.n_episodes} episodes: "
        f"reward {report.mean['reward']:.1f} +/- {report.sd['reward']:.1f}, "
        f"encrypted {report.mean['encrypted']:.2f}, "
        f"steps {report.mean['steps']:.1f}; reports in {args.out}"
    )
    return EXIT_OK


def cmd_compare(args, argv) -> int:
    reports = []
    for path in args.reports:
        rep = ev.load_report(path)
        if not rep.label:
            rep.label = os.path.splitext(os.path.basename(path))[0]
        reports.append(rep)
    hashes = {r.scenario_hash for r in reports if r.scenario_hash}
    if len(hashes) > 1:
        print("warning: reports come from different scenario configurations",
              file=sys.stderr)
    comparison = ev.compare_experiments(reports)
    text = ev.comparison_to_csv(comparison)
    print(text, end="")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(args.output + ".manifest.json", "compare", argv, None, None,
                        {"reports": list(args.reports)}, [args.output])
    return EXIT_OK


# -- parser --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Exits with code 1 on usage errors, keeping code 2 for findings."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ransomsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ransomsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_scen = sub.add_parser("scenario", help="generate, validate, or edit scenario files")
    scen_sub = p_scen.add_subparsers(dest="scenario_command", required=True)

    p_gen = scen_sub.add_parser("generate", help="write a built-in scenario")
    scale = p_gen.add_mutually_exclusive_group(required=True)
    scale.add_argument("--paper-scale", action="store_true",
                       help="152-host, 22-subnet network")
    scale.add_argument("--desk-scale", action="store_true",
                       help="24-host, 6-subnet network")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.set_defaults(func=cmd_scenario_generate)

    p_val = scen_sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("path")
    p_val.set_defaults(func=cmd_scenario_validate)

    p_hf = scen_sub.add_parser("add-honeyfiles", help="plant honeyfiles on hosts")
    p_hf.add_argument("path")
    p_hf.add_argument("--hosts", required=True,
                      help="comma-separated subnet:local addresses, e.g. 8:0,9:0")
    p_hf.add_argument("-o", "--output", default=None,
                      help="write here instead of in place")
    p_hf.set_defaults(func=cmd_scenario_add_honeyfiles)

    p_train = sub.add_parser("train", help="train a policy on a scenario")
    p_train.add_argument("--scenario", required=True)
    p_train.add_argument("--rho", type=float, default=None,
                         help="risk aversion override (e.g. 1, 5, 20)")
    p_train.add_argument("--episodes", type=int, default=3000)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--resume", default=None, help="checkpoint to continue from")
    p_train.add_argument("--workers", type=int, default=1)
    p_train.add_argument("--checkpoint-every", type=int, default=10,
                         help="iterations between checkpoint writes (0: only final)")
    p_train.add_argument("--svg", action="store_true", help="also render the curve")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="roll a frozen checkpoint and write reports")
    p_eval.add_argument("--scenario", required=True)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.add_argument("--top-k", type=int, default=15)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--mode", choices=("sample", "greedy"), default="sample")
    p_eval.add_argument("--rho", type=float, default=None,
                        help="risk aversion override for the evaluation runs")
    p_eval.add_argument("--label", default=None, help="experiment label in the report")
    p_eval.add_argument("--out", default=".")
    p_eval.add_argument("--svg", action="store_true", help="also render the ranking")
    p_eval.set_defaults(func=cmd_eval)

    p_cmp = sub.add_parser("compare", help="side-by-side aggregate reports")
    p_cmp.add_argument("reports", nargs="+")
    p_cmp.add_argument("-o", "--output", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except tr.TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except scen.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
