"""Command line entry point: ``bevgraph {eval,fit,merge,render,synth}``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from ..curve import fit_bezier, fit_residual, parameterize
from ..errors import DomainError, FormatError
from ..lane_graph import merge_junctions
from .evaluate import EvalConfig, evaluate, report_to_dict
from .records import (
    FORMAT_VERSION,
    check_scene,
    dump_json,
    load_scenes,
    read_json,
    save_scenes,
)
from .render import render_svg
from .synth import SynthConfig, synth_dataset

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bevgraph", description="Lane-graph evaluation and tooling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--per-scene", action="store_true")
    p.add_argument("--det-threshold", type=float, default=0.5)
    p.add_argument("--assoc-threshold", type=float, default=0.5)
    p.add_argument("--aggregation", choices=("counts", "scene_mean"), default="counts")
    p.add_argument("--no-miou", action="store_true")

    p = sub.add_parser("fit", help="fit Bezier control points to polylines")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--parameterization", choices=("uniform", "chord"), default="uniform")
    p.add_argument("--out", required=True)

    p = sub.add_parser("merge", help="snap junction endpoints of predicted graphs")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="draw a scene as SVG")
    p.add_argument("--scene", required=True)
    p.add_argument("--pred")
    p.add_argument("--id", dest="scene_id", help="scene id (default: first scene)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate synthetic ground truth and predictions")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--config")
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-pred", required=True)
    return parser


def _cmd_eval(args) -> int:
    gt = load_scenes(args.gt)
    pred = load_scenes(args.pred, assoc_threshold=args.assoc_threshold)
    problems = [(s.scene_id, d) for s in gt for d in check_scene(s, ground_truth=True)]
    for sid, d in problems:
        print(f"{args.gt}: scene {sid}: {d.kind}: {d.message}", file=sys.stderr)
    if problems:
        return EXIT_INVALID
    config = EvalConfig(
        samples=args.samples,
        det_threshold=args.det_threshold,
        with_miou=not args.no_miou,
        aggregation=args.aggregation,
        per_scene=args.per_scene,
    )
    report = evaluate(gt, pred, config)
    dump_json(report_to_dict(report), args.report)
    s = report.summary
    print(
        f"scenes={report.n_scenes} m_pre={s['m_pre']:.4f} m_rec={s['m_rec']:.4f} "
        f"detect={s['detection_ratio']:.4f} c_pre={s['conn_precision']:.4f} "
        f"c_rec={s['conn_recall']:.4f} c_iou={s['conn_iou']:.4f}"
    )
    return EXIT_OK


def _cmd_fit(args) -> int:
    doc = read_json(args.inp)
    polylines = doc["polylines"] if isinstance(doc, dict) else doc
    if not isinstance(polylines, list):
        raise FormatError("expected a list of polylines or {'polylines': [...]}")
    curves, residuals = [], []
    for pl in polylines:
        pts = np.asarray(pl, dtype=float)
        curve = fit_bezier(pts, args.degree, args.parameterization)
        curves.append(curve.tolist())
        residuals.append(fit_residual(curve, pts, parameterize(pts, args.parameterization)))
    dump_json(
        {
            "format": "bevgraph-curves",
            "version": FORMAT_VERSION,
            "degree": args.degree,
            "parameterization": args.parameterization,
            "curves": curves,
            "residuals": residuals,
        },
        args.out,
    )
    return EXIT_OK


def _cmd_merge(args) -> int:
    scenes = load_scenes(args.inp)
    save_scenes([s.replace(graph=merge_junctions(s.graph)) for s in scenes], args.out)
    return EXIT_OK


def _pick(scenes, scene_id):
    if not scenes:
        raise FormatError("scene file holds no scenes")
    if scene_id is None:
        return scenes[0]
    for s in scenes:
        if s.scene_id == scene_id:
            return s
    raise FormatError(f"no scene with id {scene_id!r}")


def _cmd_render(args) -> int:
    scene = _pick(load_scenes(args.scene), args.scene_id)
    pred = None
    if args.pred:
        pred = _pick(load_scenes(args.pred), scene.scene_id)
    render_svg(scene, pred, args.out)
    return EXIT_OK


def _cmd_synth(args) -> int:
    config = SynthConfig.from_dict(read_json(args.config)) if args.config else SynthConfig()
    gts, preds = synth_dataset(args.seed, args.scenes, config)
    save_scenes(gts, args.out_gt)
    save_scenes(preds, args.out_pred)
    return EXIT_OK


COMMANDS = {
    "eval": _cmd_eval,
    "fit": _cmd_fit,
    "merge": _cmd_merge,
    "render": _cmd_render,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (FormatError, DomainError, KeyError, TypeError) as exc:
        print(f"bevgraph {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"bevgraph {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
