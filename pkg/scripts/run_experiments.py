#!/usr/bin/env python3
"""Sweep synthetic scenes x modes x seeds through the tracker and tabulate
TD, AOS, LSM and centre error.

    python3 scripts/run_experiments.py --seeds 5 --out results/sweep.csv
    python3 scripts/run_experiments.py --scene square --scene diag --set stall_restart=first

``--set key=value`` overrides a PsoParams field for every run.  Results go
to a CSV (one row per run) and a per-group summary is printed.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import statistics
import sys
import time
from dataclasses import fields
from multiprocessing import Pool
from pathlib import Path

from dualtrack import evaluation, synth, tracker
from dualtrack.pso import PsoParams

SCENES = {
    "square": {},
    "square-noise": {"texture": "noise", "background": "drift", "seed": 1},
    "diag": {"velocity": [1.5, 1.0], "start": [20, 20]},
    "turn": {"path": [[20, 2.0, 0.0], [20, 0.0, 1.5], [19, -1.5, 0.0]], "start": [20, 30]},
    "occluded": {"occlusions": [{"start": 25, "end": 30, "rect": [60, 50, 20, 50]}]},
    "lshape": {"shape": "lshape", "size": 30, "start": [20, 50]},
    "static": {"velocity": [0, 0], "start": [80, 60], "n_frames": 20},
}

COLUMNS = ("scene", "mode", "seed", "td", "fd", "md", "aos", "lsm", "mean_center_error",
           "status", "particle_reinits", "point_reinits", "seconds")


def _pso_overrides(items: list[str]) -> dict:
    types = {f.name: f.type for f in fields(PsoParams)}
    out = {}
    for item in items:
        key, _, value = item.partition("=")
        if key not in types:
            raise SystemExit(f"unknown PsoParams field {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def run_one(job):
    scene, spec_dict, mode, seed, overrides = job
    frames, truth = synth.generate(synth.SceneSpec.from_dict(spec_dict))
    pso = PsoParams(population=tracker.DEFAULT_POPULATION[mode], **overrides)
    t0 = time.perf_counter()
    result = tracker.run(frames, tracker.TrackerConfig(mode=mode, pso=pso, rng_seed=seed))
    seconds = time.perf_counter() - t0
    boxes = [None if f.box is None else f.box.as_rect() for f in result.frames[1:]]
    boxes += [None] * (len(truth) - 1 - len(boxes))
    rep = evaluation.evaluate(boxes, truth[1:])
    kinds = [e.kind for e in result.events]
    return {
        "scene": scene, "mode": mode, "seed": seed,
        "td": rep.td, "fd": rep.fd, "md": rep.md, "aos": rep.aos, "lsm": rep.lsm,
        "mean_center_error": rep.mean_center_error, "status": result.status,
        "particle_reinits": kinds.count("particle"), "point_reinits": kinds.count("dominant_point"),
        "seconds": seconds,
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scene", action="append", choices=sorted(SCENES),
                    help="repeatable; default all built-in scenes")
    ap.add_argument("--scene-file", action="append", default=[], metavar="JSON",
                    help="extra scene spec file; its stem names the scene")
    ap.add_argument("--mode", action="append", choices=("static", "variable"))
    ap.add_argument("--seeds", type=int, default=5, help="seeds 0..N-1")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    ap.add_argument("--out", type=Path, help="write per-run rows to this CSV")
    args = ap.parse_args(argv)

    scenes = {name: SCENES[name] for name in (args.scene or SCENES)}
    for path in args.scene_file:
        scenes[Path(path).stem] = json.loads(Path(path).read_text())
    modes = args.mode or ["static", "variable"]
    overrides = _pso_overrides(args.set)
    jobs = [(name, spec, mode, seed, overrides)
            for (name, spec), mode, seed in itertools.product(scenes.items(), modes, range(args.seeds))]

    with Pool(args.jobs) as pool:
        rows = pool.map(run_one, jobs)

    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: f"{v:.6f}" if isinstance(v, float) else v for k, v in r.items()})

    print(f"{'scene':14s} {'mode':9s} {'TD mean':>8s} {'TD min':>7s} {'AOS':>6s} {'LSM':>6s} {'CE':>6s}")
    for (scene, mode), group in itertools.groupby(rows, key=lambda r: (r["scene"], r["mode"])):
        g = list(group)
        td = [r["td"] for r in g]
        print(f"{scene:14s} {mode:9s} {statistics.mean(td):8.1f} {min(td):7.1f} "
              f"{statistics.mean(r['aos'] for r in g):6.3f} {statistics.mean(r['lsm'] for r in g):6.3f} "
              f"{statistics.median(r['mean_center_error'] for r in g):6.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
