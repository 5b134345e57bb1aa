"""Command-line entry point: ``fishcal <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .camera import CameraParameters, DomainError, Projection, ProjectionModel

log = logging.getLogger("fishcal")

SUBCOMMANDS = ("compare-models", "fit", "derive-weights", "landscape", "gen-dataset",
               "undistort", "recover", "evaluate")


def _config_bytes() -> bytes:
    return resources.files("fishcal").joinpath("reference_config.json").read_bytes()


def reference_config() -> dict:
    return json.loads(_config_bytes())


def config_hash() -> str:
    return hashlib.sha256(_config_bytes()).hexdigest()[:12]


_REFERENCE_KINDS = {
    "stg": Projection.STEREOGRAPHIC,
    "eqd": Projection.EQUIDISTANCE,
    "esa": Projection.EQUISOLID,
    "ort": Projection.ORTHOGONAL,
}


def _write_text(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
        log.info("wrote path=%s", out)
    else:
        sys.stdout.write(text)


def cmd_compare_models(args):
    from .model_zoo import comparison_table, format_table_csv

    header, rows = comparison_table(args.focal_mm, args.pitch_mm, args.quadrature_steps,
                                    include_fit=not args.no_fit)
    _write_text(format_table_csv(header, rows), args.out)


def cmd_fit(args):
    from .model_zoo import fit_generic

    ref = ProjectionModel(_REFERENCE_KINDS[args.reference], args.focal_mm)
    res = fit_generic(ref, args.quadrature_steps, args.pitch_mm)
    out = {"reference": ref.name, "reference_f_mm": ref.f, "fitted_f_mm": res.fitted_f_mm,
           "fitted_k1": res.fitted_k1, "residual_px": res.residual_px}
    _write_text(json.dumps(out, indent=2) + "\n", args.out)


def _landscape_csv(curves) -> str:
    from .ngbl import PARAMETERS

    lines = ["x," + ",".join(PARAMETERS)]
    xs = [x for x, _ in curves[PARAMETERS[0]]]
    for i, x in enumerate(xs):
        lines.append(f"{x:.6f}," + ",".join(f"{curves[p][i][1]:.8f}" for p in PARAMETERS))
    return "\n".join(lines) + "\n"


def cmd_derive_weights(args):
    from .ngbl import derive_weights, landscapes

    curves = landscapes(args.grid_points, args.samples, args.seed, args.sampling, args.threads)
    weights = derive_weights(curves=curves)
    log.info("weights %s", " ".join(f"{k}={v:.4f}" for k, v in weights.as_dict().items()))
    if args.landscape_csv:
        Path(args.landscape_csv).write_text(_landscape_csv(curves))
        log.info("wrote path=%s", args.landscape_csv)
    _write_text(json.dumps(weights.as_dict(), indent=2) + "\n", args.out)


def cmd_landscape(args):
    from .ngbl import PARAMETERS, landscape

    params = [args.param] if args.param else list(PARAMETERS)
    curves = {p: landscape(p, args.grid_points, args.samples, args.seed, args.sampling)
              for p in params}
    lines = ["x," + ",".join(params)]
    for i, (x, _) in enumerate(curves[params[0]]):
        lines.append(f"{x:.6f}," + ",".join(f"{curves[p][i][1]:.8f}" for p in params))
    _write_text("\n".join(lines) + "\n", args.out)


def cmd_gen_dataset(args):
    from .synth import generate_dataset

    manifest = generate_dataset(args.pano_dir, args.out_dir, args.count, args.split,
                                args.seed, args.threads)
    log.info("wrote manifest=%s count=%d", manifest, args.count)


def _remap_cmd(args, fn):
    from .remap import PerspectiveSpec

    params = CameraParameters.load(args.params)
    with Image.open(args.image) as im:
        image = np.asarray(im.convert("RGB"))
    spec = PerspectiveSpec(args.width or params.image_width_px,
                           args.height or params.image_height_px, args.hfov_deg)
    Image.fromarray(fn(image, params, spec)).save(args.out)
    log.info("wrote path=%s", args.out)


def cmd_undistort(args):
    from .remap import undistort

    _remap_cmd(args, undistort)


def cmd_recover(args):
    from .remap import recover

    _remap_cmd(args, recover)


def load_manifest(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_evaluate(args):
    from .metrics import evaluate_manifest
    from .remap import PerspectiveSpec, undistort

    manifest_path = Path(args.manifest)
    rows = load_manifest(manifest_path)
    base = manifest_path.parent
    gts = {r["id"]: CameraParameters.load(base / r["params"]) for r in rows}
    pred_dir = Path(args.pred_dir)
    preds = {}
    for key in gts:
        p = pred_dir / f"{key}.json"
        if p.exists():
            preds[key] = CameraParameters.load(p)
    pairs = None
    if args.with_images:
        pairs = {}
        for r in rows:
            key = r["id"]
            if key not in preds:
                continue
            gt = gts[key]
            with Image.open(base / r["image"]) as im:
                image = np.asarray(im.convert("RGB"))
            spec = PerspectiveSpec.matching(gt, args.hfov_deg)
            pred = preds[key].replace(pan_deg=gt.pan_deg, image_width_px=gt.image_width_px,
                                      image_height_px=gt.image_height_px)
            pairs[key] = (undistort(image, gt, spec), undistort(image, pred, spec))
    report = evaluate_manifest(gts, preds, pairs)
    report.write_csv(args.out)
    log.info("wrote path=%s count=%d", args.out, report.count)


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        if action.default is None or action.required:
            return action.help
        return super()._get_help_string(action)


def build_parser(cfg: dict | None = None) -> argparse.ArgumentParser:
    cfg = cfg or reference_config()
    cm, dw, gd, rm = (cfg["compare_models"], cfg["derive_weights"], cfg["gen_dataset"],
                      cfg["remap"])
    parser = argparse.ArgumentParser(
        prog="fishcal", description="Generic cubic fisheye camera toolkit.",
        formatter_class=_HelpFormatter)
    parser.add_argument("--version", action="version",
                        version=f"fishcal {__version__} (config {config_hash()})")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=cfg["seed"], help="RNG seed")
    common.add_argument("--threads", type=int, default=cfg["threads"],
                        help="maximum worker threads; results do not depend on it")
    common.add_argument("--log-level", default="INFO", help="logging threshold")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_,
                           formatter_class=_HelpFormatter)
        p.set_defaults(func=fn)
        return p

    def quad(p):
        p.add_argument("--focal-mm", type=float, default=cm["focal_mm"],
                       help="focal length shared by the reference laws")
        p.add_argument("--pitch-mm", type=float, default=cm["pitch_mm"],
                       help="pixel pitch for the mm to px conversion")
        p.add_argument("--quadrature-steps", type=int, default=cm["quadrature_steps"],
                       help="trapezoid intervals over [0, pi/2]")
        p.add_argument("--out", help="output path (default: stdout)")

    p = add("compare-models", cmd_compare_models,
            "pairwise mean absolute errors between projection laws, as CSV")
    quad(p)
    p.add_argument("--no-fit", action="store_true", help="omit the generic-fit row")

    p = add("fit", fn=cmd_fit, help_="fit the generic cubic model to a reference law")
    quad(p)
    p.add_argument("--reference", choices=sorted(_REFERENCE_KINDS), default="stg",
                   help="projection law to approximate")

    def loss_opts(p):
        p.add_argument("--grid-points", type=int, default=dw["grid_points"],
                       help="landscape grid size over [0, 1]")
        p.add_argument("--samples", type=int, default=dw["samples"],
                       help="sampled bearings per loss evaluation")
        p.add_argument("--sampling", choices=("area", "incident"), default=dw["sampling"],
                       help="cap sampling: uniform area or uniform incident angle")
        p.add_argument("--out", help="output path (default: stdout)")

    p = add("derive-weights", cmd_derive_weights,
            "harmonic joint weights from loss-landscape areas, as JSON")
    loss_opts(p)
    p.add_argument("--landscape-csv", help="also dump the four landscapes to this CSV")

    p = add("landscape", cmd_landscape, "loss landscape(s) along normalized parameters")
    loss_opts(p)
    p.add_argument("--param", choices=("theta", "psi", "f", "k1"),
                   help="single parameter to sweep (default: all four)")

    p = add("gen-dataset", cmd_gen_dataset, "synthesize fisheye patches from panoramas")
    p.add_argument("--pano-dir", required=True, help="directory of equirectangular images")
    p.add_argument("--out-dir", required=True, help="destination for patches and manifest")
    p.add_argument("--count", type=int, default=gd["count"], help="number of patches")
    p.add_argument("--split", choices=("train", "test"), default=gd["split"],
                   help="parameter distribution")

    for name, fn in (("undistort", cmd_undistort), ("recover", cmd_recover)):
        p = add(name, fn, f"{name} a fisheye image into a pinhole view")
        p.add_argument("--image", required=True, help="input fisheye image")
        p.add_argument("--params", required=True, help="CameraParameters JSON")
        p.add_argument("--out", required=True, help="output PNG path")
        p.add_argument("--width", type=int, help="output width (default: input width)")
        p.add_argument("--height", type=int, help="output height (default: input height)")
        p.add_argument("--hfov-deg", type=float, default=rm["hfov_deg"],
                       help="horizontal field of view of the pinhole output")

    p = add("evaluate", cmd_evaluate, "aggregate errors of predictions against a manifest")
    p.add_argument("--manifest", required=True, help="manifest.csv from gen-dataset")
    p.add_argument("--pred-dir", required=True, help="directory of <id>.json predictions")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--with-images", action="store_true",
                   help="also score undistorted images (PSNR/SSIM)")
    p.add_argument("--hfov-deg", type=float, default=rm["hfov_deg"],
                   help="pinhole field of view used for image scoring")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr, force=True,
                        format="%(levelname)s %(name)s %(message)s")
    log.info("start command=%s seed=%d threads=%d", args.command, args.seed, args.threads)
    try:
        args.func(args)
    except (DomainError, ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    log.info("done command=%s", args.command)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
