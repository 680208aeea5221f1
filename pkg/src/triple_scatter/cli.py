"""Command-line entry point: ``triple-scatter {scan,verify,corpus,schema}``.

A run is described by a JSON configuration file (``triple-scatter schema``
prints the JSON Schema). Exit codes:

0
    success (``verify``: every evaluated check passed)
1
    invalid configuration; nothing is written
2
    ``scan`` finished but some grid points were skipped
3
    ``verify`` finished and at least one check failed
"""

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, corpus, scatter
from .errors import ConfigError
from .hardy import Grid, SymbolTrack
from .suites import SUITES, SuiteContext, overall_pass, run_suites
from .weyl import ExtensionParams, decode_matrix, model_from_dict

log = logging.getLogger("triple_scatter")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SKIPPED = 2
EXIT_FAILED = 3

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

_NUMBER_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
MATRIX_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"anyOf": [_NUMBER_PAIR, {"type": "number"}]}},
}


def _kind_requires(kind, required):
    return {"if": {"properties": {"kind": {"const": kind}}}, "then": {"required": required}}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "triple-scatter run configuration",
    "type": "object",
    "required": ["model", "kappa", "k_grid"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["StarGraph", "LeadRational", "Interval"]},
                "n": {"type": "integer", "minimum": 1},
                "W": MATRIX_SCHEMA,
                "V": MATRIX_SCHEMA,
                "poles": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["lambda", "A"],
                        "additionalProperties": False,
                        "properties": {"lambda": {"type": "number"}, "A": MATRIX_SCHEMA},
                    },
                },
                "length": {"type": "number", "exclusiveMinimum": 0},
            },
            "allOf": [
                _kind_requires("StarGraph", ["n"]),
                _kind_requires("LeadRational", ["W"]),
                _kind_requires("Interval", ["length"]),
            ],
        },
        "alpha": {"anyOf": [{"const": "sqrt2I"}, MATRIX_SCHEMA]},
        "kappa": {
            "anyOf": [
                {"enum": ["zero", "iI"]},
                {"type": "string", "pattern": r"^diag:\[.*\]$"},
                MATRIX_SCHEMA,
            ]
        },
        "k_grid": {
            "type": "object",
            "required": ["min", "max", "count"],
            "additionalProperties": False,
            "properties": {
                "min": {"type": "number"},
                "max": {"type": "number"},
                "count": {"type": "integer", "minimum": 1},
                "spacing": {"enum": ["linear", "log"]},
            },
        },
        "hardy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 256},
                "L": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "suites": {"type": "array", "items": {"enum": list(SUITES)}},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "debug": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"corrupt_kappa_sign": {"type": "boolean"}},
        },
    },
}

DEFAULTS = {
    "alpha": "sqrt2I",
    "hardy": {"N": 4096, "L": 50.0},
    "suites": list(SUITES),
    "output": {"dir": "out", "formats": ["csv", "json"]},
    "seed": 0,
    "debug": {"corrupt_kappa_sign": False},
}


@dataclass
class RunConfig:
    """A validated configuration with the objects it describes."""

    raw: dict
    model: object
    ext: ExtensionParams
    k_grid: np.ndarray
    hardy_N: int
    hardy_L: float
    suites: list
    out_dir: Path
    formats: list
    seed: int
    corrupt_kappa_sign: bool = False
    warnings: list = field(default_factory=list)

    @property
    def config_hash(self):
        """SHA-256 of the canonical configuration, leaving out the output location."""
        hashed = {k: v for k, v in self.raw.items() if k != "output"}
        text = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _where(error):
    path = ".".join(str(p) for p in error.absolute_path)
    return path or "<root>"


def validate_config(data, strict=False):
    """Schema-check ``data``.

    Unknown keys are errors under ``strict`` and warnings otherwise.

    Returns
    -------
    list of str
        Warnings about ignored keys.

    Raises
    ------
    ConfigError
    """
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors, warnings = [], []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        if err.validator == "additionalProperties" and not strict:
            warnings.append(f"field '{_where(err)}': {err.message} (ignored)")
        else:
            errors.append(f"field '{_where(err)}': {err.message}")
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return warnings


def _strip_unknown(data, schema):
    if not isinstance(data, dict) or "properties" not in schema:
        return data
    known = schema["properties"]
    return {k: _strip_unknown(v, known[k]) for k, v in data.items() if k in known}


def _parse_kappa(spec, n):
    if isinstance(spec, str):
        if spec == "zero":
            return np.zeros((n, n))
        if spec == "iI":
            return 1j * np.eye(n)
        try:
            entries = json.loads(spec[len("diag:"):])
            diag = np.array([complex(*e) if isinstance(e, list) else complex(e) for e in entries])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"field 'kappa': cannot read diagonal preset {spec!r}") from exc
        if diag.shape != (n,):
            raise ConfigError(f"field 'kappa': diagonal preset has {diag.size} entries, model dimension is {n}")
        return np.diag(diag)
    try:
        kappa = decode_matrix(spec, "kappa")
    except ValueError as exc:
        raise ConfigError(f"field 'kappa': {exc}") from None
    if kappa.shape != (n, n):
        raise ConfigError(f"field 'kappa': shape {kappa.shape} does not match model dimension {n}")
    return kappa


def _k_grid(spec):
    lo, hi, count = spec["min"], spec["max"], spec["count"]
    if hi < lo:
        raise ConfigError("field 'k_grid': max must not be below min")
    if spec.get("spacing", "linear") == "log":
        if lo <= 0:
            raise ConfigError("field 'k_grid.min': logarithmic spacing needs min > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def build_config(data, strict=False, seed=None, out_dir=None):
    """Validate a configuration dictionary and construct the model and extension.

    Raises
    ------
    ConfigError
    """
    warnings = validate_config(data, strict)
    data = _strip_unknown(copy.deepcopy(data), CONFIG_SCHEMA)
    raw = copy.deepcopy(DEFAULTS)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    if seed is not None:
        raw["seed"] = int(seed)
    if out_dir is not None:
        raw["output"]["dir"] = str(out_dir)
    if not raw["suites"]:
        raise ConfigError("field 'suites': at least one suite is required")

    try:
        model = model_from_dict(raw["model"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"field 'model': {exc}") from None
    n = model.dim
    if raw["alpha"] == "sqrt2I":
        alpha = np.sqrt(2.0) * np.eye(n)
    else:
        try:
            alpha = decode_matrix(raw["alpha"], "alpha")
        except ValueError as exc:
            raise ConfigError(f"field 'alpha': {exc}") from None
        if alpha.shape != (n, n):
            raise ConfigError(f"field 'alpha': shape {alpha.shape} does not match model dimension {n}")
    kappa = _parse_kappa(raw["kappa"], n)
    try:
        ext = ExtensionParams(alpha, kappa)
    except ValueError as exc:
        raise ConfigError(f"field 'alpha': {exc}") from None
    try:
        Grid(raw["hardy"]["L"], raw["hardy"]["N"])
    except ValueError as exc:
        raise ConfigError(f"field 'hardy': {exc}") from None

    return RunConfig(
        raw=raw,
        model=model,
        ext=ext,
        k_grid=_k_grid(raw["k_grid"]),
        hardy_N=int(raw["hardy"]["N"]),
        hardy_L=float(raw["hardy"]["L"]),
        suites=list(raw["suites"]),
        out_dir=Path(raw["output"]["dir"]),
        formats=list(raw["output"]["formats"]),
        seed=int(raw["seed"]),
        corrupt_kappa_sign=bool(raw["debug"]["corrupt_kappa_sign"]),
        warnings=warnings,
    )


def load_config(path, strict=False, seed=None, out_dir=None):
    """Read a JSON configuration file; see :func:`build_config`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return build_config(data, strict, seed, out_dir)


# --- subcommands ---------------------------------------------------------------------------------


def run_scan(config):
    """Sweep the scattering matrix over the configured grid and write the curve files."""
    curve = scatter.scan(config.ext, config.model, config.k_grid)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    if "csv" in config.formats:
        (config.out_dir / "scattering.csv").write_text(curve.to_csv())
    if "json" in config.formats:
        (config.out_dir / "scattering.json").write_text(curve.to_json() + "\n")
    skipped = curve.skipped
    for s in skipped:
        log.warning("k = %.17g skipped: %s", s.k, s.reason)
    return EXIT_SKIPPED if skipped else EXIT_OK


def build_report(config, results):
    """Assemble the JSON-ready verification report."""
    suites, skipped = [], []
    for name, checks in results:
        suites.append({"name": name, "checks": [c.to_dict() for c in checks]})
        for c in checks:
            skipped += [{"suite": name, "tag": c.tag, **s} for s in c.skipped]
    return {
        "version": __version__,
        "config_hash": config.config_hash,
        "environment": {
            "version": __version__,
            "numpy": np.__version__,
            "seed": config.seed,
            "grid": {"N": config.hardy_N, "L": config.hardy_L},
            "k_grid": config.raw["k_grid"],
            "model": config.raw["model"],
        },
        "pass": overall_pass(results),
        "suites": suites,
        "skipped": skipped,
    }


def _fmt(value):
    return "-" if value is None else f"{value:.3e}"


def format_report(report):
    """Plain-text table of a report produced by :func:`build_report`."""
    lines = [f"triple-scatter {report['version']}  seed {report['environment']['seed']}"
             f"  config {report['config_hash'][:12]}", ""]
    width = max((len(c["tag"]) for s in report["suites"] for c in s["checks"]), default=10)
    lines.append(f"{'suite':<20} {'check':<{width}} {'residual':>10} {'tol':>10}  verdict")
    for suite in report["suites"]:
        for c in suite["checks"]:
            verdict = {True: "pass", False: "FAIL", None: "skipped"}[c["pass"]]
            extra = f"  ({len(c['skipped'])} skipped)" if c["skipped"] and c["pass"] is not None else ""
            lines.append(f"{suite['name']:<20} {c['tag']:<{width}} {_fmt(c['residual']):>10} "
                         f"{_fmt(c['tol']):>10}  {verdict}{extra}")
    if report["skipped"]:
        lines += ["", "skipped points:"]
        for s in report["skipped"]:
            lines.append(f"  {s['suite']}/{s['tag']}: {s['point']} {s['reason']}")
    lines += ["", "overall: " + ("PASS" if report["pass"] else "FAIL")]
    return "\n".join(lines) + "\n"


def run_verify(config):
    """Run the configured suites and write ``report.json`` and ``report.txt``."""
    ctx = SuiteContext(
        model=config.model,
        ext=config.ext,
        k_grid=config.k_grid,
        hardy_N=config.hardy_N,
        hardy_L=config.hardy_L,
        seed=config.seed,
        corrupt_kappa_sign=config.corrupt_kappa_sign,
    )
    results = []
    for name in config.suites:
        log.info("running suite %s", name)
        results += run_suites([name], ctx)
    report = build_report(config, results)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    (config.out_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    (config.out_dir / "report.txt").write_text(format_report(report))
    return EXIT_OK if report["pass"] else EXIT_FAILED


def run_corpus(config):
    """Write rational and Gaussian smooth vectors for ``A_kappa`` on the configured grid."""
    grid = Grid(config.hardy_L, config.hardy_N)
    track = SymbolTrack.from_model(grid, config.ext, config.model)
    vectors = {
        "rational": corpus.rational_corpus(track, config.ext.kappa, seed=config.seed),
        "gaussian": corpus.gaussian_corpus(track, config.ext.kappa, seed=config.seed),
    }
    masked = {name: [int(np.count_nonzero(~v.mask)) for v in vs] for name, vs in vectors.items()}
    doc = {
        "version": __version__,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "masked_points": masked,
        "vectors": {name: [v.to_dict() for v in vs] for name, vs in vectors.items()},
    }
    config.out_dir.mkdir(parents=True, exist_ok=True)
    (config.out_dir / "corpus.json").write_text(json.dumps(doc, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"scan": run_scan, "verify": run_verify, "corpus": run_corpus}


def _parser():
    parser = argparse.ArgumentParser(prog="triple-scatter", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("scan", "scattering matrix sweep to CSV/JSON"),
                            ("verify", "run verification suites and write a report"),
                            ("corpus", "write the model-space test corpus")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides seed)")
        p.add_argument("--strict", action="store_true", help="reject unknown configuration fields")
    sub.add_parser("schema", help="print the configuration JSON Schema")
    return parser


def _setup_logging():
    level = os.environ.get("TRIPLE_SCATTER_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level not in LOG_LEVELS:
        log.warning("TRIPLE_SCATTER_LOG=%r not understood; using 'warn'", level)


def main(argv=None):
    args = _parser().parse_args(argv)
    _setup_logging()
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=1))
        return EXIT_OK
    try:
        config = load_config(args.config, args.strict, args.seed, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in config.warnings:
        log.warning("%s", w)
    return COMMANDS[args.command](config)


if __name__ == "__main__":
    sys.exit(main())
