"""Command-line interface: match, eval, overlay, homography, synth."""

import argparse
import logging
import sys
import warnings

import numpy as np

from spectralmatch.energy import EnergyWeights
from spectralmatch.errors import ConvergenceError, InputError, MatchWarning
from spectralmatch.optimizer import (
    DESCRIPTOR_MODES,
    REGULARIZERS,
    SALIENCY_MODES,
    MatchConfig,
    external_from_paths,
    load_correspondences,
    match_multiresolution,
)

log = logging.getLogger("spectralmatch")

DEFAULTS = MatchConfig()


def _add_config_flags(p):
    g = p.add_argument_group("matching")
    g.add_argument("--patch-size", type=int, default=DEFAULTS.patch_size, help="patch side in px (default: %(default)s)")
    g.add_argument("--eigs", type=int, default=DEFAULTS.m, help="embedding dimension m (default: %(default)s)")
    g.add_argument("--levels", type=int, default=DEFAULTS.levels, help="pyramid levels (default: %(default)s)")
    g.add_argument("--window", type=int, default=DEFAULTS.window_radius,
                   help="search window radius in patches (default: %(default)s)")
    g.add_argument("--max-passes", type=int, default=DEFAULTS.max_passes,
                   help="refinement passes per level (default: %(default)s)")
    g.add_argument("--keep-percentile", type=float, default=DEFAULTS.keep_percentile,
                   help="cost percentile kept as selected (default: %(default)s)")
    g.add_argument("--sigma", type=float, default=DEFAULTS.sigma, help="affinity bandwidth (default: %(default)s)")
    w = DEFAULTS.weights
    g.add_argument("--lambda1", type=float, default=w.lambda1, help="embedding-distance weight (default: %(default)s)")
    g.add_argument("--lambda2", type=float, default=w.lambda2, help="appearance weight (default: %(default)s)")
    g.add_argument("--lambda3", type=float, default=w.lambda3, help="saliency weight (default: %(default)s)")
    g.add_argument("--descriptor", choices=DESCRIPTOR_MODES,
                   help=f"patch descriptor (default: {DEFAULTS.descriptor}, or external when descriptor files are given)")
    g.add_argument("--saliency", choices=SALIENCY_MODES,
                   help=f"saliency source (default: {DEFAULTS.saliency}, or external when saliency files are given)")
    g.add_argument("--regularizer", choices=REGULARIZERS, default=DEFAULTS.regularizer,
                   help="appearance term; auto follows --descriptor (default: %(default)s)")


def _config(args) -> MatchConfig:
    descriptor, saliency = args.descriptor, args.saliency
    if descriptor is None:
        given = getattr(args, "desc_a", None) or getattr(args, "desc_b", None)
        descriptor = "external" if given else DEFAULTS.descriptor
    if saliency is None:
        given = getattr(args, "sal_a", None) or getattr(args, "sal_b", None)
        saliency = "external" if given else DEFAULTS.saliency
    try:
        weights = EnergyWeights(args.lambda1, args.lambda2, args.lambda3)
    except InputError as exc:
        raise InputError(f"--lambda1/--lambda2/--lambda3: {exc}") from None
    return MatchConfig(
        patch_size=args.patch_size,
        m=args.eigs,
        levels=args.levels,
        window_radius=args.window,
        max_passes=args.max_passes,
        keep_percentile=args.keep_percentile,
        sigma=args.sigma,
        weights=weights,
        descriptor=descriptor,
        saliency=saliency,
        regularizer=args.regularizer,
    )


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _tau_list(text):
    try:
        taus = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tau list {text!r}") from None
    if not taus or any(t < 0 for t in taus):
        raise argparse.ArgumentTypeError("tau values must be non-negative")
    return taus


def cmd_match(args):
    from spectralmatch.imageio import load_raster
    from spectralmatch.spectral import format_spectrum

    config = _config(args)
    a, b = load_raster(args.image_a), load_raster(args.image_b)
    external = external_from_paths(args.desc_a, args.desc_b, args.sal_a, args.sal_b)
    result = match_multiresolution(a, b, config, external)
    _write_text(args.output, result.to_text())
    finest = result.trace[-1]
    log.info("%d correspondences, %d selected, final energy %.6f",
             len(result), int(result.selected.sum()), finest.energies[-1])
    if args.dump_spectrum:
        blocks = [format_spectrum(lv.embedding, f"level {lv.level}") for lv in result.trace]
        _write_text(args.dump_spectrum, "\n".join(blocks))
    if args.energy_plot:
        from spectralmatch.plotting import energy_trace

        energy_trace(result.trace, args.energy_plot)
    return 0


def cmd_eval(args):
    from spectralmatch.dataset import evaluate_dataset, load_manifest, write_report

    config = _config(args)
    records = load_manifest(args.manifest)
    report = evaluate_dataset(records, config, args.tau, args.theta, args.rho, args.workers)
    paths = write_report(report, args.output, figures=not args.no_figures)
    for r in report.failures:
        log.warning("pair %s failed: %s", r.pair_id, r.error)
    log.info("evaluated %d pairs (%d failed); wrote %s",
             len(report.evaluated), len(report.failures), ", ".join(paths))
    return 0


def cmd_overlay(args):
    from spectralmatch.dataset import load_annotations
    from spectralmatch.imageio import load_raster, save_ppm
    from spectralmatch.overlay import render_overlay

    a, b = load_raster(args.image_a), load_raster(args.image_b)
    pred = load_correspondences(args.correspondences)
    H = None
    if args.annotations:
        gt = load_annotations(args.annotations, declared="easy")
        if gt.homography is None:
            raise InputError(f"{args.annotations}: validity coloring needs at least 4 annotated pairs")
        H = gt.homography
    save_ppm(render_overlay(a, b, pred, H, show_rejected=not args.hide_rejected), args.output)
    log.info("wrote %s", args.output)
    return 0


def cmd_homography(args):
    from spectralmatch.dataset import load_annotations
    from spectralmatch.geometry import classify_pair, interpolate_keypoints

    gt = load_annotations(args.annotations, rho=args.rho, declared="easy")
    if gt.homography is None:
        raise InputError(f"{args.annotations}: need at least 4 non-degenerate pairs to fit a homography")
    H = gt.homography
    _write_text(args.output, "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in H.H))
    log.info("difficulty at rho=%g: %s", args.rho, classify_pair(H, gt.pairs, args.rho))
    if args.interpolate:
        pts = np.loadtxt(args.interpolate, comments="#", ndmin=2)
        if pts.shape[1] != 2:
            raise InputError(f"{args.interpolate}: expected 'x y' rows")
        mapped = interpolate_keypoints(H, pts)
        lines = []
        for (x, y), (u, v) in zip(pts.tolist(), mapped.tolist()):
            target = "inf inf" if np.isnan(u) else f"{u!r} {v!r}"
            lines.append(f"{x!r} {y!r} {target}")
        _write_text(args.interpolated_output, "\n".join(lines) + "\n")
    return 0


def cmd_synth(args):
    from spectralmatch.synth import write_dataset

    manifest = write_dataset(args.out_dir, args.easy, args.difficult, args.size, args.patch_size, args.seed)
    log.info("wrote %s", manifest)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr (default: off)")
    parser = argparse.ArgumentParser(prog="spectralmatch", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", parents=[common], help="match two images and write correspondences")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("-o", "--output", default="-", help="correspondence file (default: stdout)")
    p.add_argument("--desc-a", help="external descriptors for image A (finest level) (default: none)")
    p.add_argument("--desc-b", help="external descriptors for image B (finest level) (default: none)")
    p.add_argument("--sal-a", help="external saliency for image A (finest level) (default: none)")
    p.add_argument("--sal-b", help="external saliency for image B (finest level) (default: none)")
    p.add_argument("--dump-spectrum", metavar="PATH", help="write eigenvalues and eigenvectors per level (default: none)")
    p.add_argument("--energy-plot", metavar="PNG", help="plot the energy per refinement pass (default: none)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", parents=[common], help="evaluate a manifest of annotated pairs")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", default="report",
                   help="report prefix; writes PREFIX.txt, .rows, .summary and PNG figures (default: %(default)s)")
    p.add_argument("--tau", type=_tau_list, default=[10.0, 20.0, 30.0, 40.0],
                   help="comma-separated R2 thresholds in px (default: 10,20,30,40)")
    p.add_argument("--theta", type=float, default=5.0, help="R2 candidate radius in px (default: %(default)s)")
    p.add_argument("--rho", type=float, default=10.0,
                   help="easy/difficult reprojection threshold in px (default: %(default)s)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes (default: %(default)s)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures (default: off)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", parents=[common], help="draw correspondences over the two images (PPM)")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("correspondences")
    p.add_argument("-o", "--output", default="overlay.ppm", help="PPM output (default: %(default)s)")
    p.add_argument("--annotations", help="ground truth; color selected pairs valid/invalid in a 15x15 window (default: none)")
    p.add_argument("--hide-rejected", action="store_true", help="draw only selected pairs (default: off)")
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("homography", parents=[common], help="fit a homography to annotated pairs")
    p.add_argument("annotations")
    p.add_argument("-o", "--output", default="-", help="homography file (default: stdout)")
    p.add_argument("--rho", type=float, default=10.0, help="easy/difficult threshold in px (default: %(default)s)")
    p.add_argument("--interpolate", metavar="POINTS", help="file of 'x y' source points to map (default: none)")
    p.add_argument("--interpolated-output", default="-", help="mapped points (default: stdout)")
    p.set_defaults(func=cmd_homography)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic benchmark with known transforms")
    p.add_argument("out_dir")
    p.add_argument("--easy", type=int, default=10, help="translation/similarity pairs (default: %(default)s)")
    p.add_argument("--difficult", type=int, default=10, help="large-perspective pairs (default: %(default)s)")
    p.add_argument("--size", type=int, default=128, help="image side in px (default: %(default)s)")
    p.add_argument("--patch-size", type=int, default=16, help="annotation grid spacing (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.showwarning = _log_warning
        if not args.verbose:
            warnings.simplefilter("ignore", MatchWarning)
        return _run(args)


def _log_warning(message, category, filename, lineno, file=None, line=None):
    log.warning("warning: %s", message)


def _run(args):
    try:
        return args.func(args)
    except (InputError, OSError, ConvergenceError) as exc:
        print(f"spectralmatch {args.command}: error: {exc}", file=sys.stderr)
        return 2
