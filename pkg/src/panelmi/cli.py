"""Command-line front end.

Every subcommand reads an optional flat config file (``key = value`` lines,
``#`` comments) and command-line flags, flags winning. Outputs go under
``--output`` together with ``manifest.txt``, a sha256 listing of every file
written plus the completion state. Exit status is 0 on success, 1 on a data
or configuration error, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .baselines import (AmputationPlan, DeletedTruth, ampute, evaluate, mean_substitute,
                        regression_impute)
from .datamodel import Role, missing_profile
from .diagnostics import (DEFAULT_DISCARD, DEFAULT_RHAT_THRESHOLD, ConvergenceStat,
                          DescriptiveComparison, comparison_index, convergence_stat,
                          corr_compare, density_pair, describe_compare)
from .errors import ConfigError, PanelError, ShapeMismatchError
from .indices import (ABSORPTIVE_COLUMN, RANKING_HEADER, capacity_indices, rank,
                      read_index_table)
from .ingest import read_panel, read_rows, read_schema, write_rows, write_wide_csv
from .mice import MiceConfig, VisitOrder, read_result, run_mice, write_result
from .pmm import MatchType, PmmSettings
from .pooling import POOLED_HEADER, per_variable_fmi, pooled_regress
from .screening import DiagnosticsOptions, ScreeningVerdict, Thresholds, pipeline_run

MANIFEST = "manifest.txt"
TIMINGS = "timings.txt"


# -- options -------------------------------------------------------------------------

def _bool(text) -> bool:
    key = str(text).strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [t for t in str(text).replace(",", " ").split() if t]


# name -> (parser, default, help); every name maps to --name-with-dashes
OPTIONS = {
    "input": (str, None, "input panel CSV (wide or long layout)"),
    "schema": (str, None, "schema file"),
    "output": (str, None, "output directory"),
    "seed": (int, None, "random seed (mandatory for stochastic commands)"),
    "workers": (int, 1, "processes for independent chains; outputs do not depend on it"),
    "decimals": (str, "full", "'full' (round-trip) or a number of decimals for imputed files"),
    "m": (int, 50, "number of imputations (production run)"),
    "iterations": (int, 10, "sweeps per chain"),
    "trial_m": (int, 20, "number of imputations in the screening run"),
    "trial_iterations": (int, None, "sweeps per chain in the screening run (default: iterations)"),
    "k": (int, 5, "donor pool size"),
    "match_type": (str, MatchType.BOTH_STAR.value, "BothStar or ObservedHatMissingStar"),
    "visit_order": (str, VisitOrder.ASCENDING_MISSINGNESS.value, "variable visit order"),
    "ridge_rescue": (_bool, False, "retry collinear fits once with a small ridge"),
    "country_indicators": (_bool, True, "use country indicators as predictors"),
    "year_numeric": (_bool, True, "use the year as a numeric predictor"),
    "drop_incomplete_auxiliaries": (_bool, False, "drop auxiliaries with missing cells"),
    "fmi_threshold": (float, 0.60, "reject variables whose mean has a larger FMI"),
    "mean_diff_threshold": (float, 0.25, "reject larger |mean shift| / observed sd"),
    "sd_ratio_low": (float, 2.0 / 3.0, "lower bound on completed/observed sd"),
    "sd_ratio_high": (float, 1.5, "upper bound on completed/observed sd"),
    "comparison": (int, None, "1-based completed dataset used for comparisons (default ceil(m/2))"),
    "rhat_threshold": (float, DEFAULT_RHAT_THRESHOLD, "R-hat convergence threshold"),
    "discard": (float, DEFAULT_DISCARD, "leading fraction of each trace ignored by R-hat"),
    "imputed": (_list, None, "completed-data CSV files"),
    "trace": (str, None, "trace CSV written by impute"),
    "year": (int, None, "year for the capacity indices"),
    "directions": (_list, None, "sign overrides as code:+1 / code:-1"),
    "normalization": (str, "year", "'year' or 'pooled' z-scores"),
    "estimand": (str, "mean", "'mean' or a regression 'y ~ x1 + x2'"),
    "variables": (_list, None, "variables for the mean estimand (default: all targets)"),
    "mechanism": (str, None, "MCAR, MAR or MNAR"),
    "rate": (float, None, "deletion rate per target"),
    "targets": (_list, None, "variables to ampute"),
    "driver": (str, None, "MAR driver variable"),
    "truth": (str, None, "complete panel before amputation"),
    "amputed": (str, None, "amputed panel"),
    "baseline": (_list, None, "single-imputation comparators: mean, regression"),
}

GROUPS = {
    "io": ["input", "schema", "output"],
    "mice": ["seed", "workers", "decimals", "m", "iterations", "k", "match_type",
             "visit_order", "ridge_rescue", "country_indicators", "year_numeric",
             "drop_incomplete_auxiliaries"],
    "trial": ["trial_m", "trial_iterations", "fmi_threshold", "mean_diff_threshold",
              "sd_ratio_low", "sd_ratio_high"],
    "diag": ["comparison", "rhat_threshold", "discard"],
    "files": ["imputed", "trace"],
    "index": ["year", "directions", "normalization"],
    "pool": ["estimand", "variables"],
    "ampute": ["seed", "mechanism", "rate", "targets", "driver"],
    "evaluate": ["truth", "amputed", "imputed", "baseline"],
}

# options echoed into config.csv; workers is excluded because outputs must not depend on it
ECHOED = [k for k in OPTIONS if k not in ("workers", "input", "schema", "output", "config")]


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; keys may use dashes or underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in OPTIONS:
                raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
            out[key] = value
    return out


def resolve_options(args: argparse.Namespace, keys) -> dict:
    """Defaults, then config file, then flags."""
    raw = {k: OPTIONS[k][1] for k in keys}
    if getattr(args, "config", None):
        from_file = read_config_file(args.config)
        base = Path(args.config).parent
        for k, v in from_file.items():
            if k in raw:
                raw[k] = v
                # relative paths in a config file are relative to the file
                if k in ("input", "schema", "output", "trace", "truth", "amputed"):
                    raw[k] = str(base / v)
                elif k == "imputed":
                    raw[k] = [str(base / p) for p in _list(v)]
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    out = {}
    for k, v in raw.items():
        if v is None or (k in ("trial_iterations", "comparison", "year") and v == ""):
            out[k] = None
            continue
        try:
            out[k] = OPTIONS[k][0](v) if not isinstance(v, list) else v
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"option {k}: {exc}") from None
    return out


def _require(opts: dict, *names):
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigError(f"missing required option(s): {flags}")


def _existing(path, what) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} {p} does not exist")
    return p


@dataclass
class RunConfig:
    """Resolved options for one command."""
    opts: dict
    production: MiceConfig | None = None
    trial: MiceConfig | None = None
    thresholds: Thresholds | None = None
    diagnostics: DiagnosticsOptions | None = None

    @classmethod
    def build(cls, opts: dict, *, needs_mice=False, needs_trial=False) -> "RunConfig":
        for key in ("input", "schema", "truth", "amputed", "trace"):
            if opts.get(key) is not None:
                _existing(opts[key], key)
        for p in opts.get("imputed") or ():
            _existing(p, "imputed file")
        cfg = cls(opts)
        if needs_mice:
            _require(opts, "seed")
            pmm = PmmSettings(k=opts["k"], match_type=MatchType(opts["match_type"]))
            cfg.production = MiceConfig(
                seed=opts["seed"], m=opts["m"], iterations=opts["iterations"], pmm=pmm,
                visit_order=VisitOrder.parse(opts["visit_order"]),
                ridge_rescue=opts["ridge_rescue"],
                country_indicators=opts["country_indicators"],
                year_numeric=opts["year_numeric"],
                drop_incomplete_auxiliaries=opts["drop_incomplete_auxiliaries"])
        if needs_trial:
            if opts["trial_m"] < 2:
                raise ConfigError(f"trial_m must be >= 2, got {opts['trial_m']}")
            if opts["m"] < 2:
                raise ConfigError(f"m must be >= 2 for the production run, got {opts['m']}")
            cfg.trial = cfg.production.replace(
                m=opts["trial_m"], iterations=opts["trial_iterations"] or opts["iterations"])
            cfg.thresholds = Thresholds(opts["fmi_threshold"], opts["mean_diff_threshold"],
                                        (opts["sd_ratio_low"], opts["sd_ratio_high"]))
        if "discard" in opts:
            comp = opts.get("comparison")
            cfg.diagnostics = DiagnosticsOptions(None if comp is None else comp - 1,
                                                 opts["rhat_threshold"], opts["discard"])
        return cfg

    def echo(self) -> list[tuple[str, str]]:
        return [(k, "" if self.opts[k] is None else
                 " ".join(map(str, self.opts[k])) if isinstance(self.opts[k], list) else str(self.opts[k]))
                for k in ECHOED if k in self.opts]


# -- outputs ---------------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Outputs:
    """Tracks files written under one directory and emits the manifest."""

    def __init__(self, root, command: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files: list[str] = []
        self.timings: dict[str, float] = {}

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, *names: str):
        self.files.extend(names)

    def rows(self, name, header, rows):
        write_rows(self.path(name), header, rows)
        self.add(name)

    def finish(self, status: str = "complete"):
        if self.timings:
            with open(self.root / TIMINGS, "w", encoding="utf-8") as fh:
                for k, v in self.timings.items():
                    fh.write(f"{k}\t{v:.3f}\n")
        lines = [f"# panelmi {self.command}", f"status: {status}"]
        for name in sorted(set(self.files)):
            lines.append(f"{sha256_file(self.root / name)}  {name}")
        if self.timings:
            lines.append(f"# {TIMINGS} is not hashed (wall-clock timings)")
        (self.root / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> dict[str, str]:
    """name -> sha256 from a manifest; the status line is returned under 'status:'."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("status:"):
            out["status:"] = line.split(":", 1)[1].strip()
        elif line and not line.startswith("#"):
            digest, name = line.split("  ", 1)
            out[name] = digest
    return out


def _load(opts):
    _require(opts, "input", "schema")
    schema = read_schema(opts["schema"])
    return schema, read_panel(opts["input"], schema)


def _write_config(out: Outputs, cfg: RunConfig):
    out.rows("config.csv", ["option", "value"], cfg.echo())


def compute_diagnostics(observed, result, codes, diag: DiagnosticsOptions):
    """(comparison index, describe, correlations, densities, convergence, fmi) for ``codes``."""
    comp = diag.comparison if diag.comparison is not None else comparison_index(result.m)
    if not 0 <= comp < result.m:
        raise ConfigError(f"comparison imputation {comp + 1} is outside 1..{result.m}")
    ref = result.completed[comp]
    desc = describe_compare(observed, ref, codes)
    corr = corr_compare(observed, ref, codes)
    dens = tuple(density_pair(observed, ref, c) for c in codes)
    conv = ()
    if result.traces.variables:
        conv = tuple(convergence_stat(result.traces, c, diag.discard, diag.rhat_threshold)
                     if c in result.traces.variables
                     else ConvergenceStat(c, 1.0, 1.0, diag.rhat_threshold) for c in codes)
    fmi = tuple((c, per_variable_fmi(result, c)) for c in codes) if result.m >= 2 else ()
    return comp, desc, corr, dens, conv, fmi


def _write_diagnostics(out: Outputs, desc, corr, dens, conv, fmi):
    out.rows("describe.csv", DescriptiveComparison.HEADER, desc.table())
    out.rows("correlations.csv",
             ["variable_a", "variable_b", "observed", "completed", "abs_diff", "available"],
             ((a, b, corr.observed[i, k], corr.completed[i, k], corr.diff[i, k],
               bool(corr.available[i, k]))
              for i, a in enumerate(corr.variables) for k, b in enumerate(corr.variables) if i < k))
    out.rows("densities.csv", ["variable", "x", "observed", "completed", "imputed"],
             ((d.code, *row) for d in dens for row in d.table()))
    out.rows("ovl.csv", ["variable", "ovl_completed", "ovl_imputed"],
             ((d.code, d.ovl_completed, d.ovl_imputed) for d in dens))
    if conv:
        out.rows("convergence.csv", ["variable", "rhat_mean", "rhat_sd", "threshold", "passed"],
                 ((s.code, s.rhat_mean, s.rhat_sd, s.threshold, s.passed) for s in conv))
    if fmi:
        out.rows("fmi.csv", POOLED_HEADER, (est.as_row(c) for c, est in fmi))


# -- commands ---------------------------------------------------------------------------

def cmd_profile(opts: dict) -> Outputs:
    RunConfig.build(opts)
    _require(opts, "output")
    _, ds = _load(opts)
    out = Outputs(opts["output"], "profile")
    prof = missing_profile(ds)
    targets = set(ds.codes_with_role(Role.TARGET))
    out.rows("missingness.csv",
             ["variable", "label", "capacity", "observed", "missing", "missing_pct"],
             ((p.code, ds.meta(p.code).label, ds.meta(p.code).capacity.value, p.observed,
               p.missing, f"{p.percent:.2f}") for p in prof if p.code in targets))
    out.finish()
    return out


def cmd_impute(opts: dict) -> Outputs:
    cfg = RunConfig.build(opts, needs_mice=True)
    _require(opts, "output")
    _, ds = _load(opts)
    out = Outputs(opts["output"], "impute")
    try:
        t0 = time.perf_counter()
        result = run_mice(ds, cfg.production, workers=opts["workers"])
        out.timings["impute"] = time.perf_counter() - t0
        out.add(*write_result(result, out.root, decimals=opts["decimals"]))
        _write_config(out, cfg)
    except BaseException as exc:
        out.finish(f"failed: {type(exc).__name__}")
        raise
    out.finish()
    return out


def _write_verdicts(out: Outputs, verdict: ScreeningVerdict):
    out.rows("verdicts.csv", ScreeningVerdict.HEADER, verdict.table())


def cmd_pipeline(opts: dict) -> Outputs:
    cfg = RunConfig.build(opts, needs_mice=True, needs_trial=True)
    _require(opts, "output")
    _, ds = _load(opts)
    out = Outputs(opts["output"], "pipeline")
    try:
        report = pipeline_run(ds, cfg.trial, cfg.production, thresholds=cfg.thresholds,
                              diagnostics=cfg.diagnostics, workers=opts["workers"])
        out.timings.update(report.timings)
        _write_verdicts(out, report.screening)
        names = write_result(report.production, out.root / "imputations", decimals=opts["decimals"])
        out.add(*("imputations/" + n for n in names))
        _write_diagnostics(out, report.describe, report.correlations, report.densities,
                           report.convergence, report.fmi)
        _write_config(out, cfg)
    except BaseException as exc:
        out.finish(f"failed: {type(exc).__name__}")
        raise
    out.finish()
    return out


def _result_from_files(opts: dict):
    _require(opts, "imputed")
    schema, observed = _load(opts)
    return read_result(observed, opts["imputed"], schema, opts.get("trace"))


def cmd_pool(opts: dict) -> Outputs:
    RunConfig.build(opts)
    _require(opts, "output")
    result = _result_from_files(opts)
    if result.m < 2:
        raise ConfigError(f"pooling needs at least two completed datasets, got {result.m}")
    out = Outputs(opts["output"], "pool")
    spec = opts["estimand"].strip()
    if "~" in spec:
        lhs, rhs = spec.split("~", 1)
        regressors = [t.strip() for t in rhs.split("+") if t.strip()]
        rows = [est.as_row(name) for name, est in pooled_regress(result, lhs.strip(), regressors)]
    elif spec == "mean":
        codes = opts["variables"] or list(result.targets)
        rows = [per_variable_fmi(result, c).as_row(c) for c in codes]
    else:
        raise ConfigError(f"unknown estimand {spec!r}; use 'mean' or 'y ~ x1 + x2'")
    out.rows("pooled.csv", POOLED_HEADER, rows)
    out.finish()
    return out


def cmd_diagnose(opts: dict) -> Outputs:
    cfg = RunConfig.build(opts)
    _require(opts, "output")
    result = _result_from_files(opts)
    out = Outputs(opts["output"], "diagnose")
    codes = opts.get("variables") or list(result.targets)
    _, *diag = compute_diagnostics(result.original, result, codes, cfg.diagnostics)
    _write_diagnostics(out, *diag)
    out.finish()
    return out


def cmd_ampute(opts: dict) -> Outputs:
    RunConfig.build(opts)
    _require(opts, "output", "seed", "mechanism", "rate", "targets")
    _, truth = _load(opts)
    plan = AmputationPlan(opts["mechanism"], opts["rate"], tuple(opts["targets"]),
                          opts["seed"], opts.get("driver"))
    amputed, deleted = ampute(truth, plan)
    out = Outputs(opts["output"], "ampute")
    write_wide_csv(amputed, out.path("amputed.csv"))
    out.add("amputed.csv")
    out.rows("deleted.csv", ["country", "year", "variable", "value"],
             ((truth.rows[r][0], truth.rows[r][1], truth.codes[c], v)
              for r, c, v in zip(deleted.rows, deleted.cols, deleted.values)))
    out.finish()
    return out


def cmd_evaluate(opts: dict) -> Outputs:
    RunConfig.build(opts)
    _require(opts, "output", "schema", "truth", "amputed")
    schema = read_schema(opts["schema"])
    truth = read_panel(opts["truth"], schema)
    amputed = read_panel(opts["amputed"], schema)
    if not truth.same_grid(amputed):
        raise ShapeMismatchError("truth and amputed panels differ in rows or variables")
    deleted = DeletedTruth.between(truth, amputed)
    methods = []
    if opts.get("imputed"):
        sets = [read_panel(p, schema) for p in opts["imputed"]]
        for p, ds in zip(opts["imputed"], sets):
            if not truth.same_grid(ds):
                raise ShapeMismatchError(f"{p}: rows or variables differ from the truth panel")
        methods.append(("mi", sets))
    for name in opts.get("baseline") or ():
        if name == "mean":
            methods.append(("mean", [mean_substitute(amputed)]))
        elif name == "regression":
            methods.append(("regression", [regression_impute(amputed)]))
        else:
            raise ConfigError(f"unknown baseline {name!r}; use mean or regression")
    if not methods:
        raise ConfigError("nothing to evaluate: give --imputed files and/or --baseline")
    rows = []
    for name, sets in methods:
        for v in evaluate(truth, deleted, sets).variables:
            rows.append((name, v.code, v.bias, v.ks, v.corr_distortion))
    out = Outputs(opts["output"], "evaluate")
    out.rows("metrics.csv", ["method", "variable", "bias", "ks", "corr_distortion"], rows)
    out.finish()
    return out


def _parse_directions(items) -> dict[str, int]:
    out = {}
    for item in items or ():
        code, _, sign = item.partition(":")
        try:
            out[code] = int(sign)
        except ValueError:
            raise ConfigError(f"direction override {item!r} is not code:+1 or code:-1") from None
    return out


def cmd_rank(opts: dict) -> Outputs:
    RunConfig.build(opts)
    _require(opts, "input", "output")
    header = next(iter(read_rows(opts["input"])), {})
    if ABSORPTIVE_COLUMN in header:
        table, _ = read_index_table(opts["input"])
    else:
        _require(opts, "schema", "year")
        _, ds = _load(opts)
        table = capacity_indices(ds, opts["year"], directions=_parse_directions(opts["directions"]),
                                 normalization=opts["normalization"])
    out = Outputs(opts["output"], "rank")
    out.rows("ranking.csv", RANKING_HEADER, rank(table).rows())
    out.finish()
    return out


COMMANDS = {
    "profile": (cmd_profile, ["io"], "missingness per target"),
    "impute": (cmd_impute, ["io", "mice"], "multiple imputation by chained equations"),
    "pipeline": (cmd_pipeline, ["io", "mice", "trial", "diag"],
                 "screening run, production run and diagnostics"),
    "pool": (cmd_pool, ["io", "files", "pool"], "pool estimates over completed datasets"),
    "ampute": (cmd_ampute, ["io", "ampute"], "delete cells of a complete panel"),
    "evaluate": (cmd_evaluate, ["io", "evaluate"], "score imputations against deleted truth"),
    "rank": (cmd_rank, ["io", "index"], "capacity indices and absorptive ranking"),
    "diagnose": (cmd_diagnose, ["io", "files", "diag", "pool"], "diagnostics for existing files"),
}


def _keys(groups) -> list[str]:
    return list(dict.fromkeys(k for g in groups for k in GROUPS[g]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelmi", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, groups, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="flat key = value config file")
        for key in _keys(groups):
            conv, default, h = OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            if conv is _list:
                p.add_argument(flag, nargs="+", default=None, help=h)
            else:
                # parsed later so file values and flags share one converter
                p.add_argument(flag, default=None, help=f"{h} (default: {default})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func, groups, _ = COMMANDS[args.command]
    try:
        opts = resolve_options(args, _keys(groups))
        func(opts)
    except (PanelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
