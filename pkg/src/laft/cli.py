"""Command line interface.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from laft import _json
from laft.errors import InputError, NumericalError
from laft.pipeline import (
    PipelineConfig,
    load_features,
    read_labels,
    run_pipeline,
    subspace_from_files,
    sweep_csv,
    sweep_d,
)
from laft.prompts import load_prompt_file, prompt_digest
from laft.scoring import DEFAULT_K, ScoringConfig, score
from laft.subspace import DEFAULT_D, load_subspace, save_subspace
from laft.synthetic import generate_world, load_spec_file, make_split
from laft.tensor_io import save_matrix
from laft.metrics import evaluate
from laft.transform import MODES, TransformSpec, apply_transform

logger = logging.getLogger("laft")

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _parse_step(text: str) -> tuple[str, str]:
    mode, sep, prefix = text.partition(":")
    if not sep or mode not in MODES or not prefix:
        raise argparse.ArgumentTypeError(f"step must look like guide:PREFIX or ignore:PREFIX, got {text!r}")
    return mode, prefix


def _parse_label_set(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"label set must look like NAME=manifest.json, got {text!r}")
    return name, path


def _parse_d_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"d list must be comma-separated integers, got {text!r}")


def _transform_spec(args) -> TransformSpec | None:
    steps = list(args.step or [])
    if getattr(args, "subspace", None):
        if not getattr(args, "mode", None):
            raise InputError("--subspace needs --mode")
        steps.insert(0, (args.mode, args.subspace))
    if not steps:
        return None
    return TransformSpec(tuple((mode, load_subspace(prefix)) for mode, prefix in steps))


def cmd_synth(args) -> None:
    spec, normal = load_spec_file(args.spec)
    world = generate_world(spec, args.samples)
    train, test, per_attr = make_split(world, normal)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    save_matrix(train.embeddings, out / "train.npy")
    _json.write_json(out / "train.json", {"embeddings": "train.npy", "labels": train.labels, "names": train.names})
    save_matrix(test.embeddings, out / "test.npy")
    _json.write_json(out / "test.json", {"embeddings": "test.npy", "labels": test.labels, "names": test.names})
    for name, labels in per_attr.items():
        _json.write_json(out / f"test_{name}.json", {"embeddings": "test.npy", "labels": labels})
    for name, ps in world.prompts.items():
        _json.write_json(out / f"prompts_{name}.json", {"templates": list(ps.templates), "values": list(ps.values)})
        save_matrix(world.text[name], out / f"text_{name}.npy")
    _json.write_json(
        out / "world.json",
        {
            "seed": spec.seed,
            "dim": spec.dim,
            "samples_per_cell": args.samples,
            "attributes": [a.name for a in spec.attributes],
            "normal_values": {k: [str(v) for v in vs] for k, vs in normal.items()},
            "n_train": train.embeddings.rows,
            "n_test": test.embeddings.rows,
        },
    )


def cmd_render_prompts(args) -> None:
    ps = load_prompt_file(args.prompts)
    payload = {"rendered": list(ps.rendered), "digest": prompt_digest(ps)}
    if args.output:
        _json.write_json(args.output, payload)
    else:
        print(_json.dumps(payload))


def cmd_build_subspace(args) -> None:
    d = args.d if args.d is not None else DEFAULT_D[args.mode]
    s = subspace_from_files(
        args.prompts, args.text_features, d, args.center, args.average_templates, not args.no_normalize
    )
    save_subspace(s, args.output)


def cmd_transform(args) -> None:
    spec = _transform_spec(args)
    if spec is None:
        raise InputError("transform needs --subspace/--mode or at least one --step")
    v = load_features(args.input, not args.no_normalize).embeddings
    save_matrix(apply_transform(v, spec), args.output)


def cmd_score(args) -> None:
    train = load_features(args.train, not args.no_normalize).embeddings
    test = load_features(args.test, not args.no_normalize).embeddings
    cfg = ScoringConfig(args.k)
    spec = _transform_spec(args)
    if spec is not None:
        train, test = apply_transform(train, spec), apply_transform(test, spec)
    result = score(train, test, cfg, spec.describe() if spec else "")
    _json.write_json(args.output, result.to_json())


def cmd_eval(args) -> None:
    path = Path(args.scores)
    if not path.is_file():
        raise InputError(f"scores file not found: {path}")
    scores = np.asarray(json.loads(path.read_text(encoding="utf-8"))["scores"], dtype=np.float64)
    labels = read_labels(args.labels)
    if len(labels) != len(scores):
        raise InputError(f"label length mismatch: {len(labels)} labels for {len(scores)} scores")
    _json.write_json(args.output, evaluate(scores, labels).to_json())


def _pipeline_config(args) -> PipelineConfig:
    d = args.d if args.d is not None else DEFAULT_D[args.mode]
    return PipelineConfig(
        prompts=Path(args.prompts),
        text_features=Path(args.text_features),
        train=Path(args.train),
        test=Path(args.test),
        mode=args.mode,
        d=d,
        centered=args.center,
        k=args.k,
        average_templates=args.average_templates,
        normalize=not args.no_normalize,
        extra_labels={name: Path(p) for name, p in (getattr(args, "labels", None) or [])},
    )


def cmd_pipeline(args) -> None:
    run_pipeline(_pipeline_config(args), args.out)


def cmd_sweep_d(args) -> None:
    args.d = None
    cfg = _pipeline_config(args)
    labels = read_labels(args.eval_labels) if args.eval_labels else None
    rows = sweep_d(cfg, args.d_list, labels)
    Path(args.output).write_text(sweep_csv(rows), encoding="utf-8")


def _add_pipeline_args(p: argparse.ArgumentParser, with_d: bool = True) -> None:
    p.add_argument("--prompts", required=True, help="prompt JSON {templates, values}")
    p.add_argument("--text-features", required=True, help="prompt embeddings (.npy), value-major rows")
    p.add_argument("--train", required=True, help="normal reference set (.json manifest or .npy)")
    p.add_argument("--test", required=True, help="test set (.json manifest or .npy)")
    p.add_argument("--mode", choices=MODES, default="guide")
    if with_d:
        p.add_argument("--d", type=int, default=None, help="components (default 16 guide, 128 ignore)")
    p.add_argument("--center", action="store_true", help="mean-center differences before the SVD")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--average-templates", action="store_true")
    p.add_argument("--no-normalize", action="store_true", help="do not L2-normalize rows on load")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laft", description="Language-assisted feature transforms for kNN anomaly detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-attribute world")
    p.add_argument("--spec", required=True)
    p.add_argument("--samples", type=int, default=100, help="samples per attribute-value cell")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render-prompts", help="render and digest a prompt grid")
    p.add_argument("--prompts", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_render_prompts)

    p = sub.add_parser("build-subspace", help="concept subspace from prompt embeddings")
    p.add_argument("--prompts", required=True)
    p.add_argument("--text-features", required=True)
    p.add_argument("--mode", choices=MODES, default="guide", help="only selects the default d")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--center", action="store_true")
    p.add_argument("--average-templates", action="store_true")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--output", required=True, help="path prefix; writes PREFIX.npy and PREFIX.json")
    p.set_defaults(func=cmd_build_subspace)

    p = sub.add_parser("transform", help="apply guide/ignore projections")
    p.add_argument("--input", required=True)
    p.add_argument("--subspace")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--step", action="append", type=_parse_step, metavar="MODE:PREFIX")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("score", help="kNN anomaly scores")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--step", action="append", type=_parse_step, metavar="MODE:PREFIX")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUROC, AUPRC and FPR95 of a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True, help="manifest with labels")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="prompts -> subspace -> transform -> score -> eval")
    _add_pipeline_args(p)
    p.add_argument("--labels", action="append", type=_parse_label_set, metavar="NAME=MANIFEST",
                   help="extra label set reported as auroc_NAME etc.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sweep-d", help="metrics for several numbers of components")
    _add_pipeline_args(p, with_d=False)
    p.add_argument("--d-list", required=True, type=_parse_d_list, help="e.g. 2,8,32")
    p.add_argument("--eval-labels", help="manifest whose labels replace the test labels")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_sweep_d)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"laft: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"laft: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
