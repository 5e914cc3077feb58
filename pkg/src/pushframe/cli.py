"""Command-line front end: ``pushframe <verb> [options]``.

Verbs: pattern, simulate, calibrate, reconstruct, sweep, demo.

Every verb reads an experiment configuration: built-in defaults, then an
optional ``--config`` file of ``section.key = value`` lines, then ``--set
key=value`` overrides, then the dedicated flags. The digest of the resolved
configuration (worker count and output paths excluded) is stamped into
every file written, so identical configurations give byte-identical
outputs.

Exit codes: 0 success, 1 validation error, 2 I/O or format error, 3
internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import metrics
from .errors import ConfigError, FormatError, PushframeError
from .forward import IlluminationField, OpticsConfig, simulate, white_calibration
from .frames import StoredFrameStack, save_frame_stack
from .pattern import PatternSpec, default_max_run, load_pattern, max_row_run, save_pattern, \
    scramble, sylvester
from .recon import MODES, correct_2d, reconstruct, shear_correct
from .scene import (SYNTHETIC_KINDS, SceneImage, load_image, resample_height, save_image,
                    synthetic)
from .stream import (READOUTS, check_digest, dump_kv, load_calibration, load_stream, parse_kv,
                     save_calibration, save_recon, save_stream)

CONFIG_MAGIC = "PUSHFRAME-CONFIG 1"

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

ILLUMINATION_PRESETS = ("uniform", "column-ramp", "row-ramp", "vignette")


def _opt_int(text):
    return None if str(text).lower() in ("none", "") else int(text)


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    name: str
    parse: object
    default: object
    help: str
    in_digest: bool = True


KEYS = (
    Key("pattern.n", int, 128, "pattern order (power of 2)"),
    Key("pattern.seed", _opt_int, None, "scramble seed; none keeps the natural column order"),
    Key("pattern.max_run_limit", _opt_int, None, "longest allowed row run when scrambling"),
    Key("pattern.scale", int, 4, "DMD micromirrors per pattern pixel"),
    Key("scene.source", str, "texture", "synthetic kind or a PGM/PPM path"),
    Key("scene.width", int, 128, "scene width for synthetic scenes"),
    Key("scene.channels", int, 1, "channels for synthetic scenes (1 or 3)"),
    Key("scene.seed", int, 0, "seed of the texture scene"),
    Key("optics.contrast_floor", float, 0.0, "reflectance of an off mirror"),
    Key("optics.blur_sigma", float, 0.0, "Gaussian PSF std, pattern pixels"),
    Key("optics.illumination", str, "uniform", "one of " + ", ".join(ILLUMINATION_PRESETS)),
    Key("optics.illumination_strength", float, 0.2, "relative gain variation of the preset"),
    Key("optics.step_error", float, 0.0, "fractional step miscalibration"),
    Key("optics.step_jitter", float, 0.0, "random per-step offset std"),
    Key("optics.stray_light", float, 0.0, "pedestal per supersampled pixel"),
    Key("optics.read_noise", float, 0.0, "Gaussian std per column sum"),
    Key("optics.shot_noise", _bool, False, "Poisson noise on/off"),
    Key("optics.photons_per_unit", float, 1e4, "photons per unit column sum"),
    Key("optics.supersample", int, 4, "micromirror oversampling of the simulation"),
    Key("optics.shear_rows_per_column", float, 0.0, "vertical scene shear"),
    Key("optics.readout", str, "binary", "binary or differential"),
    Key("recon.mode", str, "debiased", "naive, flatfield, debiased or 2d"),
    Key("recon.fast", _bool, False, "use the fast Walsh-Hadamard path"),
    Key("recon.shear", float, 0.0, "shear to undo after reconstruction"),
    Key("run.seed", int, 0, "seed of all noise streams"),
    Key("run.workers", int, 1, "worker threads (never changes results)", False),
    Key("run.output", str, ".", "default output directory", False),
)
KEY_INDEX = {k.name: k for k in KEYS}
ALIASES = {"seed": "run.seed", "n": "pattern.n", "mode": "recon.mode", "width": "scene.width"}


def resolve_key(name: str) -> str:
    """Full ``section.key`` for a possibly abbreviated name; KeyError if unknown."""
    if name in KEY_INDEX:
        return name
    if name in ALIASES:
        return ALIASES[name]
    matches = [k for k in KEY_INDEX if k.split(".", 1)[1] == name]
    if len(matches) == 1:
        return matches[0]
    raise KeyError(name)


class ExperimentConfig:
    """Validated experiment parameters keyed by ``section.key``."""

    def __init__(self, values=None):
        raw = {k.name: k.default for k in KEYS}
        bad = []
        for name, value in (values or {}).items():
            try:
                full = resolve_key(name)
            except KeyError:
                bad.append(name)
                continue
            try:
                raw[full] = KEY_INDEX[full].parse(value) if isinstance(value, str) else value
            except (TypeError, ValueError):
                bad.append(full)
        if bad:
            raise ConfigError(f"unknown or malformed configuration keys: {bad}", bad)
        self._values = raw
        self._validate()

    def _validate(self):
        v = self._values
        bad = []
        n = v["pattern.n"]
        if not isinstance(n, int) or n < 1 or n & (n - 1) or n > 4096:
            bad.append("pattern.n")
        if v["pattern.max_run_limit"] is not None and v["pattern.max_run_limit"] < 2:
            bad.append("pattern.max_run_limit")
        if v["pattern.scale"] < 1:
            bad.append("pattern.scale")
        src = v["scene.source"]
        if src not in SYNTHETIC_KINDS and not Path(src).is_file():
            bad.append("scene.source")
        if v["scene.width"] < 1:
            bad.append("scene.width")
        if v["scene.channels"] not in (1, 3):
            bad.append("scene.channels")
        if v["optics.illumination"] not in ILLUMINATION_PRESETS:
            bad.append("optics.illumination")
        if not 0 <= v["optics.illumination_strength"] < 1:
            bad.append("optics.illumination_strength")
        if v["optics.readout"] not in READOUTS:
            bad.append("optics.readout")
        if _mode_name(v["recon.mode"]) not in MODES:
            bad.append("recon.mode")
        if v["run.workers"] < 1:
            bad.append("run.workers")
        if not bad:
            try:
                self.optics()
            except ConfigError as exc:
                bad += [f"optics.{f}" for f in exc.fields]
        if bad:
            raise ConfigError("invalid configuration: " + ", ".join(bad), bad)

    def __getitem__(self, name):
        return self._values[resolve_key(name)]

    def replace(self, **changes):
        vals = dict(self._values)
        vals.update({resolve_key(k.replace("__", ".")): val for k, val in changes.items()})
        return ExperimentConfig(vals)

    def with_value(self, name, value):
        vals = dict(self._values)
        vals[resolve_key(name)] = value
        return ExperimentConfig(vals)

    def to_text(self, include_local=False) -> str:
        items = [(k.name, _fmt(self._values[k.name])) for k in KEYS
                 if include_local or k.in_digest]
        return dump_kv(CONFIG_MAGIC, items)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("ascii")).hexdigest()[:16]

    @property
    def mode(self) -> str:
        return _mode_name(self["recon.mode"])

    def illumination(self) -> IlluminationField:
        kind = self["optics.illumination"]
        a = self["optics.illumination_strength"]
        n = self["pattern.n"]
        ramp = np.linspace(1.0 - a, 1.0 + a, n)
        if kind == "column-ramp":
            return IlluminationField.column_gains_field(ramp)
        if kind == "row-ramp":
            return IlluminationField.separable_field(ramp, np.ones(n))
        if kind == "vignette":
            return IlluminationField.vignette_field(floor=1.0 - a)
        return IlluminationField()

    def optics(self) -> OpticsConfig:
        kw = {k.name.split(".", 1)[1]: self._values[k.name] for k in KEYS
              if k.name.startswith("optics.") and "illumination" not in k.name}
        return OpticsConfig(illumination=self.illumination(), seed=self["run.seed"], **kw)

    def pattern(self) -> PatternSpec:
        n, scale = self["pattern.n"], self["pattern.scale"]
        if self["pattern.seed"] is None:
            return PatternSpec(n, None, None, self["pattern.max_run_limit"], scale)
        limit = self["pattern.max_run_limit"] or default_max_run(n)
        return scramble(sylvester(n), self["pattern.seed"], limit, scale)

    def scene(self) -> SceneImage:
        src, n = self["scene.source"], self["pattern.n"]
        if src in SYNTHETIC_KINDS:
            params = {"seed": self["scene.seed"]} if src == "texture" else {}
            if src == "delta":
                params = {"row": n // 2, "col": self["scene.width"] // 2}
            return synthetic(src, n, self["scene.width"], self["scene.channels"], **params)
        return resample_height(load_image(src), n)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _mode_name(mode):
    return "2d-corrected" if mode == "2d" else mode


def load_config(path) -> dict:
    text = Path(path).read_text(encoding="ascii")
    first = text.lstrip().splitlines()[0].strip() if text.strip() else ""
    return parse_kv(text, CONFIG_MAGIC if first == CONFIG_MAGIC else None)


# -- pipeline -------------------------------------------------------------------

def run_pipeline(cfg: ExperimentConfig, label="", pattern=None, scene=None):
    """Simulate, calibrate as the mode needs, reconstruct and score one experiment.

    Returns ``(recon_image, quality_report)``.
    """
    pattern = cfg.pattern() if pattern is None else pattern
    scene = cfg.scene() if scene is None else scene
    optics = cfg.optics()
    mode = cfg.mode
    calib = None
    if mode == "2d-corrected":
        _, frames = simulate(scene, pattern, optics, keep_frames=True, workers=cfg["run.workers"])
        white = white_calibration(pattern, optics, scene.channels)
        stream = correct_2d(frames, white, optics)
    else:
        stream = simulate(scene, pattern, optics, workers=cfg["run.workers"])
        if mode == "flatfield":
            calib = white_calibration(pattern, optics, scene.channels)
    img = reconstruct(stream, pattern, calib, mode, cfg["recon.fast"])
    if cfg["recon.shear"]:
        img = shear_correct(img, cfg["recon.shear"])
    report = metrics.QualityReport.compare(img, scene, label, config_digest=cfg.digest,
                                           pattern_digest=pattern.digest)
    return img, report


# -- argument handling ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p, *flags):
    p.add_argument("--config", help="experiment configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    table = {
        "n": ("--n", dict(type=int, help="pattern order")),
        "seed": ("--seed", dict(help="pattern scramble seed")),
        "max-run": ("--max-run", dict(help="max row run when scrambling")),
        "scale": ("--scale", dict(type=int, help="micromirrors per pattern pixel")),
        "scene": ("--scene", dict(help="synthetic kind or PGM/PPM path")),
        "width": ("--width", dict(type=int, help="synthetic scene width")),
        "channels": ("--channels", dict(type=int, help="synthetic scene channels")),
        "readout": ("--readout", dict(choices=READOUTS, help="detector readout")),
        "workers": ("--workers", dict(type=int, help="worker threads")),
        "mode": ("--mode", dict(choices=("naive", "flatfield", "debiased", "2d"),
                                help="reconstruction correction mode")),
    }
    for f in flags:
        opt, kw = table[f]
        p.add_argument(opt, dest="flag_" + f.replace("-", "_"), **kw)


FLAG_KEYS = {"n": "pattern.n", "seed": "pattern.seed", "max_run": "pattern.max_run_limit",
             "scale": "pattern.scale", "scene": "scene.source", "width": "scene.width",
             "channels": "scene.channels", "readout": "optics.readout",
             "workers": "run.workers", "mode": "recon.mode"}


def build_parser():
    p = _Parser(prog="pushframe", description="Pushframe camera simulator and reconstruction.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    q = sub.add_parser("pattern", help="write a (scrambled) Hadamard pattern file")
    _common(q, "n", "seed", "max-run", "scale")
    q.add_argument("-o", "--out", help="pattern file (default <output>/pattern.txt)")

    q = sub.add_parser("simulate", help="simulate the measurement stream")
    _common(q, "n", "seed", "max-run", "scale", "scene", "width", "channels", "readout",
            "workers")
    q.add_argument("--pattern", help="pattern file (default: built from the configuration)")
    q.add_argument("-o", "--out", help="stream CSV (default <output>/stream.csv)")
    q.add_argument("--keep-frames", metavar="DIR", help="also write the frame stack here")
    q.add_argument("--raw-frames", action="store_true", help="add exact float dumps of frames")

    q = sub.add_parser("calibrate", help="white calibration through the configured optics")
    _common(q, "n", "seed", "max-run", "scale", "channels", "readout")
    q.add_argument("--pattern", help="pattern file")
    q.add_argument("-o", "--out", help="calibration file (default <output>/calib.txt)")

    q = sub.add_parser("reconstruct", help="reconstruct an image from a stream")
    _common(q, "n", "seed", "max-run", "scale", "mode", "readout")
    q.add_argument("--stream", required=True, help="stream CSV")
    q.add_argument("--pattern", help="pattern file")
    q.add_argument("--calib", help="calibration file (required by flatfield and 2d)")
    q.add_argument("--frames", help="frame stack directory (required by 2d)")
    q.add_argument("--fast", action="store_true", help="fast Walsh-Hadamard path")
    q.add_argument("--shear", type=float, help="undo this vertical shear (rows per column)")
    q.add_argument("--truth", help="ground-truth PGM/PPM for a quality report")
    q.add_argument("--report", help="write the quality report CSV here")
    q.add_argument("--raw", action="store_true", help="also write an exact float dump")
    q.add_argument("-o", "--out", help="image (default <output>/recon.pgm or .ppm)")

    q = sub.add_parser("sweep", help="run the pipeline for each value of one parameter")
    _common(q, "n", "seed", "scene", "width", "channels", "mode", "workers")
    q.add_argument("--param", required=True, help="configuration key to vary")
    q.add_argument("--values", required=True, help="comma-separated values")
    q.add_argument("-o", "--out", help="report CSV (default <output>/sweep.csv)")

    q = sub.add_parser("demo", help="identity+naive vs scrambled+flatfield side by side")
    _common(q, "n", "width", "workers")
    q.add_argument("-o", "--out", help="output directory (default <output>/demo)")
    keys = "\n".join(f"  {k.name:<30} {k.help} (default {k.default})" for k in KEYS)
    for q in sub.choices.values():
        q.formatter_class = argparse.RawDescriptionHelpFormatter
        q.epilog = "configuration keys (--config file or --set KEY=VALUE):\n" + keys
    return p


def config_from_args(args) -> ExperimentConfig:
    values = load_config(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", [item])
        k, _, v = item.partition("=")
        values[k.strip()] = v.strip()
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, "flag_" + attr, None)
        if v is not None:
            values[key] = v if not isinstance(v, int) else str(v)
    return ExperimentConfig(values)


def _out(cfg, given, default):
    path = Path(given) if given else Path(cfg["run.output"]) / default
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _stamp(cfg):
    return f"pushframe config {cfg.digest}"


def _pattern_for(cfg, path):
    return load_pattern(path) if path else cfg.pattern()


# -- verbs ----------------------------------------------------------------------

def cmd_pattern(args, cfg):
    pattern = cfg.pattern()
    out = _out(cfg, args.out, "pattern.txt")
    save_pattern(pattern, out, _stamp(cfg))
    print(f"wrote {out}: order {pattern.order}, "
          f"{'identity' if pattern.is_identity else 'scrambled'}, "
          f"max_row_run {max_row_run(pattern)}, digest {pattern.digest}")


def cmd_simulate(args, cfg):
    pattern = _pattern_for(cfg, args.pattern)
    if pattern.order != cfg["pattern.n"]:
        cfg = cfg.with_value("pattern.n", pattern.order)
    scene = cfg.scene()
    optics = cfg.optics()
    result = simulate(scene, pattern, optics, keep_frames=bool(args.keep_frames),
                      workers=cfg["run.workers"])
    stream, frames = result if args.keep_frames else (result, None)
    if stream.steps != scene.width + pattern.order - 1:
        raise AssertionError("stream length differs from W + n - 1")
    stream = _restamp(stream, cfg)
    out = _out(cfg, args.out, "stream.csv")
    save_stream(stream, out)
    print(f"wrote {out}: T={stream.steps} steps, n={stream.n}, C={stream.channels}, "
          f"config {cfg.digest}")
    if frames is not None:
        manifest = save_frame_stack(frames, args.keep_frames, _stamp(cfg), args.raw_frames)
        print(f"wrote {len(frames) * len(frames.ports)} frames, index {manifest}")


def _restamp(stream, cfg):
    return replace(stream, config_digest=cfg.digest)


def cmd_calibrate(args, cfg):
    pattern = _pattern_for(cfg, args.pattern)
    if pattern.order != cfg["pattern.n"]:
        cfg = cfg.with_value("pattern.n", pattern.order)
    calib = white_calibration(pattern, cfg.optics(), cfg["scene.channels"])
    out = _out(cfg, args.out, "calib.txt")
    save_calibration(calib, out)
    text = out.read_text(encoding="ascii")
    out.write_text(text.replace("\n", f"\n# {_stamp(cfg)}\n", 1), encoding="ascii", newline="\n")
    print(f"wrote {out}: white column {calib.white_column}, "
          f"weights {calib.weights.min():.6g}..{calib.weights.max():.6g}")


def cmd_reconstruct(args, cfg):
    stream = load_stream(args.stream)
    pattern = _pattern_for(cfg, args.pattern)
    if pattern.order != cfg["pattern.n"]:
        cfg = cfg.with_value("pattern.n", pattern.order)
    check_digest(pattern.digest, stream.pattern_digest, "stream/pattern")
    calib = load_calibration(args.calib) if args.calib else None
    if calib is not None:
        check_digest(pattern.digest, calib.pattern_digest, "calibration/pattern")
    mode = cfg.mode
    if mode == "flatfield" and calib is None:
        raise ConfigError("--mode flatfield needs --calib", ["calib"])
    if mode == "2d-corrected":
        if calib is None or not args.frames:
            raise ConfigError("--mode 2d needs --calib and --frames", ["calib", "frames"])
        frames = StoredFrameStack(args.frames, pattern, cfg.optics())
        stream = correct_2d(frames, calib, cfg.optics())
        calib = None
    fast = args.fast or cfg["recon.fast"]
    img = reconstruct(stream, pattern, calib, mode, fast)
    shear = args.shear if args.shear is not None else cfg["recon.shear"]
    if shear:
        img = shear_correct(img, shear)
    ext = ".pgm" if img.data.shape[2] == 1 else ".ppm"
    out = _out(cfg, args.out, "recon" + ext)
    save_recon(img, out, raw=args.raw, comment=_stamp(cfg))
    print(f"wrote {out}: {img.data.shape[0]}x{img.data.shape[1]}x{img.data.shape[2]}, "
          f"mode {img.mode}")
    if args.truth:
        truth = resample_height(load_image(args.truth), pattern.order)
        report = metrics.QualityReport.compare(img, truth, Path(args.truth).name,
                                               config_digest=cfg.digest,
                                               pattern_digest=pattern.digest)
        print(report)
        if args.report:
            Path(args.report).write_text(report.to_csv(), encoding="ascii", newline="\n")


def cmd_sweep(args, cfg):
    try:
        key = resolve_key(args.param)
    except KeyError:
        raise ConfigError(f"unknown sweep parameter {args.param!r}", [args.param]) from None
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty", ["values"])
    configs = [cfg.with_value(key, KEY_INDEX[key].parse(v)) for v in values]
    reports = [run_pipeline(c, f"{key}={v}")[1] for c, v in zip(configs, values)]
    table = metrics.reports_to_csv(reports, [{"parameter": key, "value": v} for v in values])
    out = _out(cfg, args.out, "sweep.csv")
    out.write_text(f"# {_stamp(cfg)}\n" + table, encoding="ascii", newline="\n")
    for v, r in zip(values, reports):
        print(f"{key}={v}: PSNR {r.psnr_mean:.2f} dB, line score "
              f"{max(r.line_artifact_score):.4g}")
    print(f"wrote {out}")


def cmd_demo(args, cfg):
    """Natural pattern with naive synthesis against scrambled pattern with flat field."""
    out = Path(args.out) if args.out else Path(cfg["run.output"]) / "demo"
    out.mkdir(parents=True, exist_ok=True)
    base = cfg.replace(**{"optics.illumination": "vignette",
                          "optics.illumination_strength": 0.15,
                          "optics.contrast_floor": 0.02,
                          "optics.blur_sigma": 0.25})
    runs = [
        ("identity-naive", base.replace(**{"pattern.seed": None, "recon.mode": "naive"})),
        ("scrambled-flatfield", base.replace(**{"pattern.seed": 1, "recon.mode": "flatfield"})),
    ]
    scene = base.scene()
    images, reports = [], []
    for label, c in runs:
        img, rep = run_pipeline(c, label, scene=scene)
        ext = ".pgm" if scene.channels == 1 else ".ppm"
        save_recon(img, out / f"{label}{ext}", comment=_stamp(c))
        images.append(np.clip(img.data, 0.0, 1.0))
        reports.append(rep)
    gap = np.ones((scene.height, 4, scene.channels))
    panel = np.concatenate([scene.data, gap, images[0], gap, images[1]], axis=1)
    save_image(SceneImage(panel), out / f"side_by_side{ext}")
    (out / "report.csv").write_text(f"# {_stamp(base)}\n" + metrics.reports_to_csv(reports),
                                    encoding="ascii", newline="\n")
    text = "\n\n".join(str(r) for r in reports) + "\n"
    (out / "report.txt").write_text(f"# {_stamp(base)}\n" + text, encoding="ascii", newline="\n")
    print(text, end="")
    print(f"wrote {out}/side_by_side{ext} (truth | identity+naive | scrambled+flatfield)")


VERBS = {"pattern": cmd_pattern, "simulate": cmd_simulate, "calibrate": cmd_calibrate,
         "reconstruct": cmd_reconstruct, "sweep": cmd_sweep, "demo": cmd_demo}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        VERBS[args.verb](args, cfg)
        return EXIT_OK
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (FormatError, OSError) as exc:
        print(f"pushframe: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PushframeError, ValueError) as exc:
        print(f"pushframe: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - anything else is a broken invariant
        print(f"pushframe: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
