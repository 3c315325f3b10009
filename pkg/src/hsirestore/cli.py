"""Command-line entry point: simulate, denoise, inpaint, evaluate, inspect.

Exit codes: 0 success, 1 usage, 2 I/O or file format, 3 numerical or
conditioning failure, 4 underdetermined inpainting pixel.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cube import HsiCube, load_cube, load_mask, save_cube, save_mask
from .errors import HsiError
from .fasthyde import DenoiseRequest, fasthyde_iid, fasthyde_noniid, fasthyde_poisson
from .fasthyin import (
    InpaintRequest,
    fasthyin_diag,
    fasthyin_iid,
    fasthyin_noniid,
    fasthyin_poisson,
)
from .metrics import report, save_report
from .patch import DenoiserSpec
from .simulate import add_case1, add_case2, add_case3, make_ground_truth, make_stripe_mask
from .subspace import (
    DiagonalNoise,
    FullNoise,
    IidNoise,
    direction_powers,
    estimate_noise,
    load_noise,
    save_noise,
)

EXIT_USAGE = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers


def parse_noise(text):
    """``auto | iid | iid:<sigma> | diag:<path> | full:<path> | poisson`` -> (kind, model)."""
    if text in ("auto", "poisson", "iid"):
        return text, None
    kind, sep, arg = text.partition(":")
    if not sep or not arg:
        raise UsageError(f"bad --noise value {text!r}")
    if kind == "iid":
        try:
            return "iid", IidNoise(float(arg))
        except ValueError as exc:
            raise UsageError(f"bad sigma in --noise {text!r}: {exc}") from None
    if kind in ("diag", "full"):
        model = load_noise(arg)
        if kind == "diag":
            if isinstance(model, FullNoise):
                raise UsageError(f"{arg} holds a full covariance; use full:{arg}")
            if isinstance(model, IidNoise):
                return "iid", model
            return "diag", model
        return "full", model.as_full() if isinstance(model, DiagonalNoise) else model
    raise UsageError(f"unknown noise kind {kind!r}")


def parse_rank(text):
    if text == "auto":
        return None
    try:
        k = int(text)
    except ValueError:
        raise UsageError(f"--rank must be 'auto' or an integer, got {text!r}") from None
    if k < 1:
        raise UsageError("--rank must be >= 1")
    return k


def parse_size(text):
    try:
        w, h, b = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like WxHxB, got {text!r}") from None
    return w, h, b


def parse_int_list(text):
    if not text:
        return []
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def denoiser_spec(args):
    kw = {}
    if args.patch is not None:
        kw["patch_size"] = args.patch
    if args.step is not None:
        kw["step"] = args.step
    if args.search is not None:
        kw["search_window"] = args.search
    if args.denoiser == "identity":
        return DenoiserSpec.identity()
    if args.denoiser == "nlmeans":
        return DenoiserSpec.nlmeans(**kw)
    return DenoiserSpec.bm3d(**kw)


def write_manifest(path, items):
    lines = [f"{k}={v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    out = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if not ln.strip() or ln.startswith("#"):
            continue
        key, sep, value = ln.partition("=")
        if not sep:
            raise UsageError(f"manifest line without '=': {ln!r}")
        out[key.strip()] = value.strip()
    return out


def _sidecar_path(args):
    return Path(args.report) if args.report else Path(str(args.output) + ".txt")


def _result_items(result, command):
    items = {
        "command": command,
        "pipeline": result.pipeline,
        "k": result.k,
        "noise_kind": type(result.noise).__name__,
        "clamped": result.clamped,
    }
    if isinstance(result.noise, IidNoise):
        items["sigma"] = repr(float(result.noise.sigma))
    if result.ridge_pixels is not None:
        items["ridge_pixels"] = len(result.ridge_pixels)
    for name, t in result.timings.items():
        items[f"time_{name}"] = f"{t:.6f}"
    return items


# --------------------------------------------------------------- commands


def cmd_simulate(args):
    if args.manifest:
        m = read_manifest(args.manifest)
        args.case = int(m["case"])
        args.sigma = float(m["sigma"]) if m.get("sigma") else None
        args.snr_db = float(m["snr_db"]) if m.get("snr_db") else None
        args.size = m["size"]
        args.rank = int(m["rank"])
        args.seed = int(m["seed"])
        args.stripe_bands = m.get("stripe_bands", "")
        args.stripe_cols = m.get("stripe_cols", "")
    if args.case is None:
        raise UsageError("simulate needs --case (or --manifest)")
    width, height, n_bands = parse_size(args.size)
    rank = 8 if args.rank is None else int(args.rank)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    clean = make_ground_truth(width, height, n_bands, rank, args.seed)
    items = {
        "command": "simulate",
        "version": __version__,
        "case": args.case,
        "size": f"{width}x{height}x{n_bands}",
        "rank": rank,
        "seed": args.seed,
    }
    noise_seed = args.seed + 1
    if args.case == 1:
        if args.sigma is None or not args.sigma > 0:
            raise UsageError("case 1 needs --sigma > 0")
        noisy = add_case1(clean, args.sigma, noise_seed)
        save_noise(IidNoise(args.sigma), out / "noise.hsin")
        items["sigma"] = repr(float(args.sigma))
    elif args.case == 2:
        noisy, model = add_case2(clean, noise_seed)
        save_noise(model, out / "noise.hsin")
    elif args.case == 3:
        snr = 15.0 if args.snr_db is None else args.snr_db
        if not np.isfinite(snr):
            raise UsageError("--snr-db must be finite")
        noisy, alpha = add_case3(clean, snr, noise_seed)
        items["snr_db"] = repr(float(snr))
        items["alpha"] = repr(float(alpha))
    else:
        raise UsageError(f"--case must be 1, 2 or 3, got {args.case}")
    save_cube(clean, out / "clean.hsic")
    save_cube(noisy, out / "noisy.hsic")

    bands = parse_int_list(args.stripe_bands)
    cols = parse_int_list(args.stripe_cols)
    if bands or cols:
        if not (bands and cols):
            raise UsageError("--stripe-bands and --stripe-cols must be given together")
        if max(bands) >= n_bands or max(cols) >= width or min(bands + cols) < 0:
            raise UsageError("stripe band or column index out of range")
        save_mask(make_stripe_mask(clean.shape, bands, cols), out / "mask.hsim")
        items["stripe_bands"] = ",".join(map(str, bands))
        items["stripe_cols"] = ",".join(map(str, cols))
    write_manifest(out / "manifest.txt", items)
    return 0


def _load_input(args):
    if not args.input:
        raise UsageError("--input is required")
    if not args.output:
        raise UsageError("--output is required")
    return load_cube(args.input)


def cmd_denoise(args):
    cube = _load_input(args)
    kind, model = parse_noise(args.noise)
    k = parse_rank(args.rank)
    spec = denoiser_spec(args)
    if kind == "poisson":
        result = fasthyde_poisson(DenoiseRequest(cube, None, k, spec))
    elif kind == "iid":
        result = fasthyde_iid(DenoiseRequest(cube, model, k, spec))
    else:
        result = fasthyde_noniid(DenoiseRequest(cube, model, k, spec))
    save_cube(HsiCube(result.restored.data, cube.dtype), args.output)
    write_manifest(_sidecar_path(args), _result_items(result, "denoise"))
    return 0


def cmd_inpaint(args):
    cube = _load_input(args)
    if not args.mask:
        raise UsageError("inpaint needs --mask")
    mask = load_mask(args.mask)
    kind, model = parse_noise(args.noise)
    k = parse_rank(args.rank)
    spec = denoiser_spec(args)
    req = InpaintRequest(cube, mask, model, k, spec, args.policy)
    pipeline = {
        "poisson": fasthyin_poisson,
        "iid": fasthyin_iid,
        "diag": fasthyin_diag,
        "full": fasthyin_noniid,
        "auto": fasthyin_noniid,
    }[kind]
    result = pipeline(req)
    save_cube(HsiCube(result.restored.data, cube.dtype), args.output)
    write_manifest(_sidecar_path(args), _result_items(result, "inpaint"))
    return 0


def cmd_evaluate(args):
    if not (args.reference and args.input):
        raise UsageError("evaluate needs --reference and --input")
    ref = load_cube(args.reference)
    test = load_cube(args.input)
    if args.alpha is not None:
        if not args.alpha > 0:
            raise UsageError("--alpha must be positive")
        test = test.with_data(test.data / args.alpha)
    rep = report(ref, test, peak=args.peak)
    if args.report:
        save_report(rep, args.report)
    else:
        sys.stdout.write(rep.to_csv())
    return 0


def inspect_text(cube, top=None):
    """Human- and machine-readable summary of a cube."""
    lines = [f"width={cube.width}", f"height={cube.height}", f"n_bands={cube.n_bands}"]
    noise = estimate_noise(cube)
    std = np.sqrt(noise.band_variances())
    lines.append(f"noise_sigma_iid={noise.as_iid().sigma:.10g}")
    lines.append("")
    lines.append("# band min max mean std noise_std")
    for b, band in enumerate(cube.data):
        lines.append(
            f"{b} {band.min():.10g} {band.max():.10g} {band.mean():.10g} {band.std():.10g} {std[b]:.10g}"
        )
    vals, noise_power = direction_powers(cube, noise)
    n_show = len(vals) if top is None else min(top, len(vals))
    lines.append("")
    lines.append("# index eigenvalue noise_power ratio")
    for i in range(n_show):
        lines.append(f"{i + 1} {float(vals[i])!r} {float(noise_power[i])!r} {float(vals[i] / noise_power[i])!r}")
    return "\n".join(lines) + "\n"


def cmd_inspect(args):
    if not args.input:
        raise UsageError("--input is required")
    text = inspect_text(load_cube(args.input), args.top)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ parser


def _add_pipeline_flags(p):
    p.add_argument("--input", required=True, help="input cube (HSIC)")
    p.add_argument("--output", required=True, help="restored cube (HSIC)")
    p.add_argument(
        "--noise",
        default="auto",
        help="auto | iid | iid:<sigma> | diag:<path> | full:<path> | poisson (default auto)",
    )
    p.add_argument("--rank", default="auto", help="subspace dimension: auto or an integer")
    p.add_argument("--denoiser", choices=("identity", "nlmeans", "bm3d"), default="bm3d")
    p.add_argument("--patch", type=int, help="patch size in pixels")
    p.add_argument("--step", type=int, help="reference patch step in pixels")
    p.add_argument("--search", type=int, help="search window size in pixels")
    p.add_argument("--seed", type=int, default=0, help="unused by the pipelines; recorded for replay")
    p.add_argument("--report", help="key=value sidecar path (default <output>.txt)")


def build_parser():
    parser = _Parser(prog="hsirestore", description="Hyperspectral denoising and inpainting.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic clean/noisy pair and a manifest")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--case", type=int, choices=(1, 2, 3))
    p.add_argument("--sigma", type=float, help="case 1 noise std")
    p.add_argument("--snr-db", type=float, help="case 3 SNR in dB (default 15)")
    p.add_argument("--size", default="64x64x32", help="WxHxB (default 64x64x32)")
    p.add_argument("--rank", type=int, help="rank of the clean cube (default 8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stripe-bands", default="", help="bands with stripes, e.g. 14-17")
    p.add_argument("--stripe-cols", default="", help="striped columns, e.g. 5,17,30")
    p.add_argument("--manifest", help="replay the run described by this manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("denoise", help="FastHyDe denoising")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("inpaint", help="FastHyIn inpainting with a known mask")
    _add_pipeline_flags(p)
    p.add_argument("--mask", required=True, help="observation mask (HSIM)")
    p.add_argument("--policy", choices=("error", "ridge"), default="error")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("evaluate", help="per-band PSNR/SSIM report as CSV")
    p.add_argument("--reference", required=True, help="clean cube (HSIC)")
    p.add_argument("--input", required=True, help="cube to score (HSIC)")
    p.add_argument("--report", help="CSV path (default stdout)")
    p.add_argument("--peak", type=float, default=1.0, help="PSNR/SSIM dynamic range (default 1)")
    p.add_argument("--alpha", type=float, help="divide the scored cube by this Poisson scale first")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect", help="dimensions, band statistics, noise and eigenvalue profile")
    p.add_argument("--input", required=True)
    p.add_argument("--top", type=int, help="show only the first N eigenvalues")
    p.add_argument("--report", help="write the summary here instead of stdout")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hsirestore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HsiError as exc:
        print(f"hsirestore: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hsirestore: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"hsirestore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
