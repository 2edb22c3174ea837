"""Command-line entry point: ``flowtrack <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import io as fio
from .actions import RecognitionConfig
from .costs import dumps_costs, loads_costs, with_overrides
from .metrics import map_action_detection, mot_report
from .model import Trajectory, ValidationError
from .pipeline import TrainConfig, track, track_rows, train_costs
from .synth import ScenarioConfig, generate_scenario, scenario_stats
from .trees import BoostOptions

DEFAULTS = {"bias": -2.0, "entry_cost": 10.0, "exit_cost": 10.0, "lambda": 15, "epsilon": 0.4, "mu": 3.0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _cmd_synth(args) -> int:
    cfg = ScenarioConfig.from_json(Path(args.config).read_text())
    if args.seed is not None:
        cfg.seed = args.seed
    sc = generate_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provenance = {"scenario": cfg.to_dict(), **DEFAULTS}
    header = fio.DatasetHeader.from_config(cfg.dataset_config(), provenance)
    fio.write_detections(out / "detections.jsonl", header, sc.detections)
    fio.write_ground_truth(sc.gt_rows(), out / "gt.csv")
    (out / "stats.json").write_text(json.dumps(scenario_stats(sc), indent=1) + "\n")
    print(f"wrote {len(sc.detections)} detections and {len(sc.gt_observations)} gt boxes to {out}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    gt = fio.parse_ground_truth(args.gt)
    _, dets = fio.parse_detections(args.detections)
    cfg = TrainConfig(
        bias=args.bias,
        c_entr=args.entry_cost,
        c_exit=args.exit_cost,
        max_gap=args.max_gap,
        seed=args.seed,
        paf_constant=1.0 if args.ablate_paf else None,
        boost=BoostOptions(args.n_trees, args.max_depth, args.shrinkage, args.min_samples_leaf),
    )
    costs = train_costs(gt, dets, cfg)
    Path(args.out).write_text(dumps_costs(costs) + "\n")
    return 0


def _recognition(args, header) -> RecognitionConfig:
    return RecognitionConfig(lam=args.lam, epsilon=args.epsilon, class_names=header.class_names)


def _cmd_track(args) -> int:
    header, dets = fio.parse_detections(args.detections)
    costs = loads_costs(Path(args.model).read_text())
    costs = with_overrides(costs, c_entr=args.entry_cost, c_exit=args.exit_cost, bias=args.bias)
    trajs = track(dets, costs, mode=args.mode, max_gap=args.max_gap)
    fio.write_tracks(track_rows(dets, trajs, _recognition(args, header)), args.out)
    return 0


def _cmd_recognize(args) -> int:
    header, dets = fio.parse_detections(args.detections)
    rows = fio.parse_tracks(args.tracks)
    index = {}
    for i, o in enumerate(dets):
        index.setdefault((o.frame, tuple(o.bbox.as_list())), i)
    members: dict[int, list[int]] = {}
    for n, r in enumerate(sorted(rows, key=lambda r: (r.id, r.frame))):
        key = (r.frame, tuple(r.bbox.as_list()))
        if key not in index:
            raise fio.DataError(f"track box at frame {r.frame} (id {r.id}) matches no detection")
        members.setdefault(r.id, []).append(index[key])
    trajs = [Trajectory.from_members(tid, ms, dets) for tid, ms in sorted(members.items())]
    fio.write_tracks(track_rows(dets, trajs, _recognition(args, header)), args.out)
    return 0


def _emit(report, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    else:
        print(report.table())


def _cmd_eval_mot(args) -> int:
    gt = fio.parse_ground_truth(args.gt)
    hyp = fio.parse_tracks(args.tracks)
    _emit(mot_report(gt, hyp, args.iou), args.report)
    return 0


def _cmd_eval_map(args) -> int:
    gt = fio.parse_ground_truth(args.gt)
    hyp = fio.parse_tracks(args.tracks)
    curves = {} if args.pr_out else None
    names = args.class_names.split(",") if args.class_names else list(fio.OKUTAMA_CLASSES)
    rep = map_action_detection(gt, hyp, args.iou, names, curves)
    _emit(rep, args.report)
    if args.pr_out:
        with open(args.pr_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class", "recall", "precision"])
            for c, pts in sorted(curves.items()):
                for r, p in pts:
                    w.writerow([c, repr(r), repr(p)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flowtrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic dataset from a scenario JSON")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=_cmd_synth)

    t = sub.add_parser("train", help="fit observation and transition cost models")
    t.add_argument("--gt", required=True)
    t.add_argument("--detections", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--bias", type=float, default=DEFAULTS["bias"])
    t.add_argument("--entry-cost", type=float, default=DEFAULTS["entry_cost"])
    t.add_argument("--exit-cost", type=float, default=DEFAULTS["exit_cost"])
    t.add_argument("--max-gap", type=int, default=30)
    t.add_argument("--n-trees", type=int, default=100)
    t.add_argument("--max-depth", type=int, default=3)
    t.add_argument("--shrinkage", type=float, default=0.1)
    t.add_argument("--min-samples-leaf", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ablate-paf", action="store_true", help="train with the PAF cue held constant")
    t.set_defaults(func=_cmd_train)

    k = sub.add_parser("track", help="associate detections into tracks")
    k.add_argument("--detections", required=True)
    k.add_argument("--model", required=True)
    k.add_argument("--out", required=True)
    k.add_argument("--mode", choices=("offline", "online"), default="offline")
    k.add_argument("--max-gap", type=int, default=30)
    k.add_argument("--entry-cost", type=float)
    k.add_argument("--exit-cost", type=float)
    k.add_argument("--bias", type=float)
    k.add_argument("--lambda", dest="lam", type=int, default=DEFAULTS["lambda"])
    k.add_argument("--epsilon", type=float, default=DEFAULTS["epsilon"])
    k.set_defaults(func=_cmd_track)

    r = sub.add_parser("recognize", help="relabel tracks by sliding-window action recognition")
    r.add_argument("--tracks", required=True)
    r.add_argument("--detections", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--lambda", dest="lam", type=int, default=DEFAULTS["lambda"])
    r.add_argument("--epsilon", type=float, default=DEFAULTS["epsilon"])
    r.set_defaults(func=_cmd_recognize)

    for name, func, helptext in (
        ("eval-mot", _cmd_eval_mot, "CLEAR-MOT metrics"),
        ("eval-map", _cmd_eval_map, "action-detection mAP"),
    ):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--gt", required=True)
        e.add_argument("--tracks", required=True)
        e.add_argument("--iou", type=float, default=0.5)
        e.add_argument("--report", choices=("json", "table"), default="table")
        if name == "eval-map":
            e.add_argument("--pr-out", help="write precision-recall points as CSV")
            e.add_argument("--class-names", help="comma-separated class names for the table")
        e.set_defaults(func=func)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except (OSError, ValidationError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"flowtrack {args.command}: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
