"""Command-line entry point: ``stochtex <command> ...``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..codec_dct import DctFormatError, compress_dct, load_dct, save_dct
from ..imageio import ImageFormatError, atomic_write_bytes, load_image, save_image
from ..kernels import KernelSpec
from ..texture import FetchCounter, Image2D
from .config import ConfigError, load_config, replace
from .render import filter_image, render
from .stats import CSV_COLUMNS, compare, loglog_slope, stats_csv

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

CSV_HELP = f"""CSV columns ({', '.join(CSV_COLUMNS)}):
  value              swept parameter value
  mse                mean squared error against the reference (blank without one)
  psnr               10 log10(1 / mse), peak 1.0; "inf" for identical images
  mean_variance      per-pixel sample variance averaged over pixels and channels
  total_fetches      texel/voxel reads summed over all lookups
  wall_time_seconds  render wall time excluding scene setup
  spp                samples per pixel
"""


class UsageError(Exception):
    pass


class NumericalError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _save_outputs(path: str, image: Image2D) -> list[str]:
    """Write ``path`` and, for PFM output, a PNG preview beside it."""
    _check_finite(image)
    save_image(path, image)
    written = [path]
    root, ext = os.path.splitext(path)
    if ext.lower() == ".pfm":
        save_image(root + ".png", Image2D(np.clip(image.data, 0.0, 1.0)))
        written.append(root + ".png")
    return written


def _check_finite(image: Image2D) -> None:
    if not np.all(np.isfinite(image.data)):
        raise NumericalError("result contains non-finite values")


def cmd_render(args) -> int:
    cfg = load_config(args.config, args.set)
    ref = load_image(args.reference or cfg.reference) if (args.reference or cfg.reference) else None
    image, st = render(cfg, ref)
    written = _save_outputs(args.out, image)
    if args.variance:
        save_image(args.variance, Image2D(st.variance))
        written.append(args.variance)
    if args.csv:
        atomic_write_bytes(args.csv, stats_csv([st.row(cfg.spp)]).encode())
        written.append(args.csv)
    mse = "n/a" if st.mse_vs_reference is None else f"{st.mse_vs_reference:.6g}"
    print(f"wrote {', '.join(written)}")
    print(f"mse={mse} mean_variance={st.mean_variance:.6g} total_fetches={st.total_fetches} "
          f"wall_time_seconds={st.wall_time_seconds:.3f} spp={st.spp}")
    return EXIT_OK


def cmd_filter(args) -> int:
    tex = load_image(args.image, srgb=not args.linear)
    spec = KernelSpec.parse(args.kernel, a=args.a, n=args.n, sigma=args.sigma)
    counter = FetchCounter()
    out = filter_image(tex, spec, args.mode, args.spp, args.scale, args.seed, counter)
    written = _save_outputs(args.out, out)
    print(f"wrote {', '.join(written)}")
    print(f"total_fetches={counter.count}")
    return EXIT_OK


def cmd_compress(args) -> int:
    tex = load_image(args.image, srgb=not args.linear)
    dct = compress_dct(tex)
    save_dct(args.out, dct)
    raw = tex.width * tex.height * tex.channels
    print(f"wrote {args.out}: {dct.nbytes} bytes payload, {raw / dct.nbytes:.2f}:1 versus 8-bit")
    return EXIT_OK


def cmd_decompress(args) -> int:
    image = load_dct(args.input).decode_all()
    save_image(args.out, image)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    mse, psnr, sq = compare(load_image(args.image_a), load_image(args.image_b))
    print(f"mse={mse:.9g} psnr={'inf' if psnr == float('inf') else f'{psnr:.6g}'}")
    if args.error_image:
        save_image(args.error_image, Image2D(sq))
    return EXIT_OK


def _sweep_value(param: str, text: str):
    from .config import coerce

    return coerce(param, text)


def cmd_sweep(args) -> int:
    base = load_config(args.config, args.set)
    values = [v for v in args.values.split(",") if v]
    if not values:
        raise UsageError("--values needs at least one entry")
    if args.reference:
        ref = load_image(args.reference)
    else:
        ref_cfg = replace(base, mode="after_exhaustive", spp=args.reference_spp)
        ref, _ = render(ref_cfg)
    rows = []
    mses = []
    for text in values:
        cfg = replace(base, **{args.param: _sweep_value(args.param, text)})
        image, st = render(cfg, ref)
        _check_finite(image)
        rows.append(st.row(text))
        mses.append(st.mse_vs_reference)
    csv_text = stats_csv(rows)
    if args.out:
        atomic_write_bytes(args.out, csv_text.encode())
    sys.stdout.write(csv_text)
    if args.param == "spp" and len(values) > 1 and all(m > 0 for m in mses):
        slope = loglog_slope([float(v) for v in values], mses)
        print(f"# log-log slope of mse vs spp: {slope:.3f}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stochtex", description="Stochastic texture filtering renderer and tools.",
                epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def overrides(sp):
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")

    r = sub.add_parser("render", help="render a scene config", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("config")
    overrides(r)
    r.add_argument("--out", default="render.pfm", help="output image (.pfm also writes a .png preview)")
    r.add_argument("--reference", help="reference image for mse")
    r.add_argument("--variance", help="write the per-pixel variance image here")
    r.add_argument("--csv", help="write a one-row stats CSV here")
    r.set_defaults(func=cmd_render)

    f = sub.add_parser("filter", help="resample one image with a chosen filter")
    f.add_argument("image")
    f.add_argument("--kernel", required=True, help="box, tent, bspline3, mitchell, lanczos or gaussian")
    f.add_argument("--mode", choices=("det", "frs", "fis"), default="det")
    f.add_argument("--spp", type=int, default=64)
    f.add_argument("--scale", type=int, default=4, help="integer magnification")
    f.add_argument("--sigma", type=float)
    f.add_argument("--a", type=float, help="Mitchell sharpness")
    f.add_argument("--n", type=int, help="Lanczos lobes")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--linear", action="store_true", help="treat PNG input as linear")
    f.add_argument("--out", default="filtered.pfm")
    f.set_defaults(func=cmd_filter)

    c = sub.add_parser("compress", help="compress an image to the 8x8 DCT block format")
    c.add_argument("image")
    c.add_argument("--out", required=True)
    c.add_argument("--linear", action="store_true", help="treat PNG input as linear")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="decode a DCT container to PFM or PNG")
    d.add_argument("input")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decompress)

    s = sub.add_parser("stats", help="mse and psnr between two images")
    s.add_argument("image_a")
    s.add_argument("image_b")
    s.add_argument("--error-image", help="write the squared-error image here")
    s.set_defaults(func=cmd_stats)

    w = sub.add_parser("sweep", help="render once per parameter value and emit CSV", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    w.add_argument("config")
    overrides(w)
    w.add_argument("--param", required=True, help="config key to vary, e.g. spp")
    w.add_argument("--values", required=True, help="comma-separated values")
    w.add_argument("--reference", help="reference image; default renders after_exhaustive")
    w.add_argument("--reference-spp", type=int, default=4096)
    w.add_argument("--out", help="CSV output path (also printed to stdout)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"stochtex: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageFormatError, DctFormatError) as e:
        print(f"stochtex: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, FloatingPointError) as e:
        print(f"stochtex: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"stochtex: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
