"""Command-line interface: calibrate once, then correct and visualize.

Subcommands: pie, calibrate, correct, lil, synth, inspect. Every
subcommand accepts --config FILE with `key = value` lines merged under
the explicit flags (flags win). Logs go to stderr, data to files,
machine-readable results to stdout. Outputs are written atomically and
are bit-identical for any --workers value.

Exit status: 0 on success, 2 on usage errors, 1 otherwise with a single
stderr line `error: <category>: <detail>` where category is one of
format-error, scope-error, calibration-error, invalid-input, io-error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .bayer import CHANNELS, BayerPattern
from .calibration import (
    CalibrationMap,
    build_calibration,
    crop_calibration,
    load_calibration,
    mean_level_image,
    read_calibration_header,
    save_calibration,
)
from .correction import correct_image, quantize14
from .errors import CalibrationError, FormatError, PhotonCalError, ScopeError
from .lil import LilLut, occupancy
from .parallel import pmap, resolve_workers
from .pie import FocusProfile, RenyiParams, pie, select_focus
from .pngio import read_image_any, write_png8, write_png16
from .raw import CropRect, RawImage, crop as crop_raw, crop_array, read_raw
from .spectra import (
    LEVEL_NAMES,
    QeSet,
    load_qe_table,
    load_spectrum,
    photon_counts,
)
from .synth import generate_dataset
from .util import atomic_write_bytes

log = logging.getLogger("photoncal")

_CATEGORIES = (
    (FormatError, "format-error"),
    (ScopeError, "scope-error"),
    (CalibrationError, "calibration-error"),
    (PhotonCalError, "invalid-input"),
    (ValueError, "invalid-input"),
    (OSError, "io-error"),
)


# ---------------------------------------------------------------------------
# configuration file merging


def _config_tokens(path: Path) -> list[str]:
    """Turn `key = value` lines into CLI tokens (inserted before the flags)."""
    tokens: list[str] = []
    for lineno, raw_line in enumerate(path.read_text().splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`, got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{path}:{lineno}: empty key")
        flag = "--" + key.lower().replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif value.lower() in ("false", "no", "off"):
            pass
        else:
            tokens.append(flag)
            tokens.extend(value.split())
    return tokens


def _merge_config(argv: list[str]) -> list[str]:
    """Extract --config and splice its tokens right after the subcommand.

    Explicit flags come later on the line, so for single-valued options
    argparse lets them win over the config file.
    """
    config: str | None = None
    rest: list[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg == "--config":
            if i + 1 >= len(argv):
                raise ValueError("--config requires a file path")
            config = argv[i + 1]
            i += 2
        elif arg.startswith("--config="):
            config = arg.split("=", 1)[1]
            i += 1
        else:
            rest.append(arg)
            i += 1
    if config is None:
        return rest
    tokens = _config_tokens(Path(config))
    for j, arg in enumerate(rest):
        if not arg.startswith("-"):
            return rest[: j + 1] + tokens + rest[j + 1 :]
    return rest + tokens


# ---------------------------------------------------------------------------
# shared helpers


def _expand_inputs(paths, exts) -> list[Path]:
    """Files stay files; directories contribute their matching files, sorted."""
    out: list[Path] = []
    for p in (Path(p) for p in paths):
        if p.is_dir():
            found = sorted(q for q in p.iterdir() if q.suffix.lower() in exts)
            if not found:
                raise ValueError(f"{p}: no {'|'.join(exts)} files in directory")
            out.extend(found)
        elif p.exists():
            out.append(p)
        else:
            raise ValueError(f"{p}: no such file or directory")
    return out


def _add_workers(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--workers", type=int, default=None, metavar="N",
        help="worker processes (default: all cores; results are identical for any N)",
    )


def _add_crop(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--crop", metavar="X0,Y0,W,H", default=None,
        help="crop window applied to every frame before processing",
    )


def _pie_task(task):
    level, index, path, alpha, weighting, crop_text = task
    img = read_raw(path)
    if crop_text:
        img = crop_raw(img, CropRect.parse(crop_text))
    params = RenyiParams(alpha)
    return level, index, [pie(img, ch, params, weighting) for ch in CHANNELS]


# ---------------------------------------------------------------------------
# pie


def _cmd_pie(args) -> int:
    files = _expand_inputs(args.inputs, (".nraw",))
    if (args.z_start is None) != (args.z_step is None):
        raise ValueError("--z-start and --z-step must be given together")
    workers = resolve_workers(args.workers)
    tasks = [
        (0, i, str(f), args.alpha, args.weighting, args.crop)
        for i, f in enumerate(files)
    ]
    rows = [row for _, _, row in pmap(_pie_task, tasks, workers)]
    z = None
    if args.z_start is not None:
        z = [args.z_start + i * args.z_step for i in range(len(files))]
    profile = FocusProfile(np.asarray(rows), None if z is None else np.asarray(z))
    selected = select_focus(profile, args.select, args.manual_index)
    print("# frame" + (" z" if z is not None else "") + " PIE_R PIE_G1 PIE_G2 PIE_B")
    for i, row in enumerate(rows):
        cells = [str(i)]
        if z is not None:
            cells.append(f"{z[i]:.6f}")
        cells.extend(f"{v:.12g}" for v in row)
        print(" ".join(cells))
    print(f"selected {selected}")
    log.info("focus frame %d of %d (%s)", selected, len(files), files[selected].name)
    return 0


# ---------------------------------------------------------------------------
# calibrate


def _load_qe(paths) -> QeSet:
    if len(paths) == 1:
        return load_qe_table(paths[0])
    if len(paths) == 4:
        r, g1, g2, b = (load_spectrum(p) for p in paths)
        return QeSet(r, g1, g2, b)
    raise ValueError("--qe takes one five-column table or four per-channel files")


def _cmd_calibrate(args) -> int:
    spectra = [load_spectrum(p) for p in args.spectra]
    qe = _load_qe(args.qe)
    table = photon_counts(spectra, qe)
    workers = resolve_workers(args.workers)
    level_files = [_expand_inputs([p], (".nraw",)) for p in args.levels]
    tasks = [
        (li, fi, str(f), args.alpha, args.weighting, None)
        for li, files in enumerate(level_files)
        if len(files) > 1
        for fi, f in enumerate(files)
    ]
    by_level: dict[int, dict[int, list[float]]] = {}
    for li, fi, row in pmap(_pie_task, tasks, workers):
        by_level.setdefault(li, {})[fi] = row
    pattern = None
    means = []
    chosen = []
    for li, files in enumerate(level_files):
        frames = [read_raw(f) for f in files]
        if pattern is None:
            pattern = frames[0].pattern
        elif frames[0].pattern is not pattern:
            raise ValueError(
                f"level {LEVEL_NAMES[li]} has Bayer pattern "
                f"{frames[0].pattern.name}, expected {pattern.name}"
            )
        if len(frames) > 1:
            rows = [by_level[li][fi] for fi in range(len(frames))]
            index = select_focus(
                FocusProfile(np.asarray(rows)), args.select, args.manual_index
            )
        else:
            index = 0
        chosen.append(index)
        means.append(mean_level_image(frames, index, args.half_window))
        log.info(
            "%s: %d frame(s), focus index %d", LEVEL_NAMES[li], len(frames), index
        )
    metadata = {
        "levels": {
            LEVEL_NAMES[li]: {
                "files": [f.name for f in files],
                "focus_index": chosen[li],
            }
            for li, files in enumerate(level_files)
        },
        "half_window": args.half_window,
        "alpha": args.alpha,
        "weighting": args.weighting,
        "select": args.select,
        "spectra": [Path(p).name for p in args.spectra],
        "qe": [Path(p).name for p in args.qe],
    }
    cal = build_calibration(means, table, pattern, metadata)
    save_calibration(cal, args.out)
    report = _calibration_report(cal, chosen, level_files, Path(args.out))
    print(report)
    if args.report:
        atomic_write_bytes(args.report, (report + "\n").encode())
    return 0


def _calibration_report(cal: CalibrationMap, chosen, level_files, out: Path) -> str:
    n_def = int(cal.defect_mask.sum())
    focus = " ".join(
        f"{LEVEL_NAMES[li]}={chosen[li]}/{len(files)}"
        for li, files in enumerate(level_files)
    )
    return "\n".join(
        [
            "calibration report",
            f"pattern: {cal.pattern.name}",
            f"size: {cal.width}x{cal.height}",
            f"defective: {n_def} pixels ({cal.defect_fraction:.4%})",
            f"focus frames: {focus}",
            "photon table (relative counts):",
            cal.photon_table.format_text(),
            f"output: {out} ({out.stat().st_size} bytes)",
        ]
    )


# ---------------------------------------------------------------------------
# correct

_CAL: CalibrationMap | None = None
_CROP: str | None = None


def _init_correct(cal_path: str, crop_text: str | None) -> None:
    global _CAL, _CROP
    cal = load_calibration(cal_path)
    if crop_text:
        cal = crop_calibration(cal, CropRect.parse(crop_text))
    cal.fallback_curves()  # resolve once per worker, not once per frame
    _CAL, _CROP = cal, crop_text


def _correct_one(task):
    src, out_png, out_txt, full_scale, strip_workers = task
    img = read_raw(src)
    if _CROP:
        img = crop_raw(img, CropRect.parse(_CROP))
    result = correct_image(img, _CAL, full_scale, workers=strip_workers)
    write_png16(quantize14(result.values, result.full_scale), out_png)
    side = result.sidecar()
    side["source"] = Path(src).name
    text = "".join(f"{key} = {_fmt(value)}\n" for key, value in side.items())
    atomic_write_bytes(out_txt, text.encode())
    return side


def _fmt(value) -> str:
    return f"{value:.17g}" if isinstance(value, float) else str(value)


def _cmd_correct(args) -> int:
    files = _expand_inputs(args.inputs, (".nraw",))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    workers = resolve_workers(args.workers)
    # fail on a bad map or crop here, not inside a pool initializer
    parent_cal = load_calibration(args.cal)
    if args.crop:
        crop_calibration(parent_cal, CropRect.parse(args.crop))
    del parent_cal
    # one frame: threads across strips; many frames: processes across frames
    strip_workers = workers if len(files) == 1 else 1
    frame_workers = 1 if len(files) == 1 else workers
    tasks = [
        (
            str(f),
            str(outdir / (f.stem + ".png")),
            str(outdir / (f.stem + ".txt")),
            args.full_scale,
            strip_workers,
        )
        for f in files
    ]
    results = pmap(
        _correct_one, tasks, frame_workers,
        initializer=_init_correct, initargs=(args.cal, args.crop),
    )
    for side in results:
        log.info(
            "%s: %d below / %d above range, %d fallback pixels",
            side["source"], side["clamped_low"], side["clamped_high"],
            side["fallback_pixels"],
        )
    print(f"corrected {len(results)} frame(s) -> {outdir}")
    return 0


# ---------------------------------------------------------------------------
# lil


def _load_lil_input(path: str, bayer, bit_depth, crop_text):
    p = Path(path)
    if p.suffix.lower() == ".nraw":
        img = read_raw(p)
        if crop_text:
            img = crop_raw(img, CropRect.parse(crop_text))
        return img
    arr = read_image_any(p)
    if bayer is not None:
        if arr.ndim != 2:
            raise ValueError(f"{p}: --bayer applies to single-channel images only")
        depth = bit_depth if bit_depth else (8 if arr.dtype == np.uint8 else 16)
        img = RawImage(arr, depth, BayerPattern.from_name(bayer))
        if crop_text:
            img = crop_raw(img, CropRect.parse(crop_text))
        return img
    if crop_text:
        arr = crop_array(arr, CropRect.parse(crop_text))
    return arr


def _lil_levels_task(task):
    path, bayer, bit_depth, crop_text, mode = task
    item = _load_lil_input(path, bayer, bit_depth, crop_text)
    return {name: np.flatnonzero(occ) for name, occ in occupancy(item, mode).items()}


def _lil_apply_task(task):
    path, bayer, bit_depth, crop_text, mode, levels, out_base, planes = task
    item = _load_lil_input(path, bayer, bit_depth, crop_text)
    if levels is None:
        lut = LilLut(_lil_levels_task(task[:5]), mode)
    else:
        lut = LilLut(dict(levels), mode)
    coded = lut.apply(item)
    if planes:
        if not isinstance(item, RawImage):
            raise ValueError(f"{path}: --planes applies to mosaic input only")
        for ch, (dy, dx) in item.pattern.channel_offsets().items():
            write_png8(coded[dy::2, dx::2], f"{out_base}_{ch}.png")
    else:
        write_png8(coded, out_base + ".png")
    return lut.report()


def _lil_report_text(sections: dict[str, dict]) -> str:
    lines = []
    for title, report in sections.items():
        lines.append(f"== {title} ==")
        lines.append("group occupied lowest highest collisions")
        for name, row in report.items():
            lines.append(
                f"{name} {row['occupied']} {row['lowest']} "
                f"{row['highest']} {row['collisions']}"
            )
    return "\n".join(lines)


def _cmd_lil(args) -> int:
    files = _expand_inputs(args.inputs, (".nraw", ".png"))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    mode = args.mode.replace("-", "_")
    workers = resolve_workers(args.workers)
    common = (args.bayer, args.bit_depth, args.crop, mode)
    if args.scope == "series":
        level_dicts = pmap(
            _lil_levels_task, [(str(f), *common) for f in files], workers
        )
        names = set(level_dicts[0])
        merged: dict[str, np.ndarray] = {}
        for d in level_dicts:
            if set(d) != names:
                raise ValueError(
                    "inputs mix incompatible image kinds in one series"
                )
            for name, levels in d.items():
                merged[name] = (
                    np.union1d(merged[name], levels) if name in merged else levels
                )
        shared = sorted(merged.items())
        tasks = [
            (str(f), *common, shared, str(outdir / f.stem), args.planes)
            for f in files
        ]
        pmap(_lil_apply_task, tasks, workers)
        report = _lil_report_text({"series": LilLut(merged, mode).report()})
    else:
        tasks = [
            (str(f), *common, None, str(outdir / f.stem), args.planes)
            for f in files
        ]
        reports = pmap(_lil_apply_task, tasks, workers)
        report = _lil_report_text(
            {f.name: rep for f, rep in zip(files, reports)}
        )
    print(report)
    atomic_write_bytes(outdir / "lil_report.txt", (report + "\n").encode())
    return 0


# ---------------------------------------------------------------------------
# synth and inspect


def _cmd_synth(args) -> int:
    truth = generate_dataset(
        Path(args.out),
        width=args.width,
        height=args.height,
        pattern=BayerPattern.from_name(args.pattern),
        seed=args.seed,
        n_defects=args.defects,
        full_scale=args.full_scale,
        flat_fraction=args.flat_fraction,
    )
    print(
        f"synthetic dataset in {args.out}: {truth['width']}x{truth['height']} "
        f"{truth['pattern']} seed={truth['seed']} defects={truth['n_defects']}"
    )
    return 0


def _cmd_inspect(args) -> int:
    for path in args.inputs:
        p = Path(path)
        with open(p, "rb") as fh:
            magic = fh.read(4)
        if magic == b"NRAW":
            img = read_raw(p)
            occupied = int(np.unique(img.samples).size)
            print(
                f"{p}: NRAW {img.width}x{img.height} {img.bit_depth}-bpc "
                f"{img.pattern.name} occupied-levels={occupied}"
            )
        elif magic == b"NCAL":
            head = read_calibration_header(p)
            keys = ",".join(sorted(head["metadata"])) or "-"
            print(
                f"{p}: NCAL v{head['version']} {head['width']}x{head['height']} "
                f"{head['pattern']} metadata-keys={keys}"
            )
        else:
            from PIL import Image

            with Image.open(p) as im:
                print(f"{p}: {im.format} {im.width}x{im.height} mode={im.mode}")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photoncal",
        description="Photon-count camera calibration, correction, and visualization.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("pie", help="focus metric table for a stack of raw frames")
    p.add_argument("inputs", nargs="+", help="NRAW files or directories")
    p.add_argument("--alpha", type=float, default=2.0, help="Renyi order (default 2)")
    p.add_argument(
        "--weighting", choices=("distinct", "occurrence"), default="distinct"
    )
    p.add_argument("--select", choices=("max", "min", "manual"), default="max")
    p.add_argument("--manual-index", type=int, default=None)
    p.add_argument("--z-start", type=float, default=None, help="stage z of frame 0")
    p.add_argument("--z-step", type=float, default=None, help="stage z step per frame")
    _add_crop(p)
    _add_workers(p)
    p.set_defaults(func=_cmd_pie)

    p = sub.add_parser("calibrate", help="build an NCAL map from level stacks")
    p.add_argument(
        "--levels", nargs=8, required=True, metavar="PATH",
        help="8 files or directories, darkest (L0) to unfiltered (L7)",
    )
    p.add_argument(
        "--spectra", nargs=7, required=True, metavar="PATH",
        help="measured light spectra for L1..L7 (two-column text)",
    )
    p.add_argument(
        "--qe", nargs="+", required=True, metavar="PATH",
        help="QE: one five-column table or four per-channel files (R G1 G2 B)",
    )
    p.add_argument("--out", required=True, help="output NCAL path")
    p.add_argument("--report", default=None, help="also write the text report here")
    p.add_argument(
        "--half-window", type=int, default=0,
        help="average this many frames each side of the focus frame",
    )
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument(
        "--weighting", choices=("distinct", "occurrence"), default="distinct"
    )
    p.add_argument("--select", choices=("max", "min", "manual"), default="max")
    p.add_argument("--manual-index", type=int, default=None)
    _add_workers(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("correct", help="raw frames to 14-bpc photon PNGs")
    p.add_argument("inputs", nargs="+", help="NRAW files or directories")
    p.add_argument("--cal", required=True, help="NCAL calibration file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--full-scale", type=float, default=None,
        help="photons at code 16383 (default: largest unfiltered channel count)",
    )
    _add_crop(p)
    _add_workers(p)
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("lil", help="least-information-loss conversion to 8 bpc")
    p.add_argument("inputs", nargs="+", help="NRAW or PNG files or directories")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--mode", choices=("per-channel", "joint"), default="per-channel"
    )
    p.add_argument("--scope", choices=("single", "series"), default="single")
    p.add_argument(
        "--bayer", choices=[pat.name for pat in BayerPattern], default=None,
        help="treat single-channel PNG input as a mosaic with this pattern",
    )
    p.add_argument(
        "--bit-depth", type=int, default=None,
        help="bit depth of PNG mosaic input (default: container depth)",
    )
    p.add_argument(
        "--planes", action="store_true",
        help="write each mosaic channel as a separate half-size PNG",
    )
    _add_crop(p)
    _add_workers(p)
    p.set_defaults(func=_cmd_lil)

    p = sub.add_parser("synth", help="synthetic acquisition with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument(
        "--pattern", choices=[pat.name for pat in BayerPattern], default="RGGB"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--defects", type=int, default=0, help="number of stuck pixels")
    p.add_argument("--full-scale", type=float, default=3600.0)
    p.add_argument("--flat-fraction", type=float, default=0.6)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("inspect", help="print container metadata")
    p.add_argument("inputs", nargs="+", help="NRAW, NCAL, or image files")
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _merge_config(argv)
        args = build_parser().parse_args(argv)
        return int(args.func(args) or 0)
    except tuple(cls for cls, _ in _CATEGORIES) as exc:
        for cls, category in _CATEGORIES:
            if isinstance(exc, cls):
                print(f"error: {category}: {exc}", file=sys.stderr)
                break
        return 1


if __name__ == "__main__":
    sys.exit(main())
