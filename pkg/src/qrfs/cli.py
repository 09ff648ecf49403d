"""Command-line front end: dataset ingestion, selector runs, evaluation,
the f-sweep harness and report emission.

Subcommands: ``select`` (with --method rrqr|nmfqr|qr-ga), ``evaluate``,
``f-sweep`` and ``factorize``. Options resolve in the order command line >
--config file > built-in default, and every report embeds the fully resolved
configuration, so a report is sufficient to reproduce its run. JSON is the
canonical report format (sorted keys, schema_version field); CSV emission
flattens the same values into plottable tables. Module errors surface as a
structured JSON object on stderr and a nonzero exit status; warnings never
change the exit status.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import QrfsError, ValidationError
from .evaluation import LabeledDataset, cross_validate, dobscv_folds
from .ga import GaConfig, qr_ga_select
from .nmfqr import NmfQrConfig, nmfqr_select
from .rrqr import RrqrConfig, SelectionResult, strong_rrqr, select_features_rrqr

SCHEMA_VERSION = 1

# (name, type, default) for every resolvable option; None defaults resolve
# at run time and are echoed as resolved values where possible.
_OPTION_SPEC = {
    "method": (str, None),
    "data": (str, None),
    "label_col": (str, None),
    "transpose": (bool, False),
    "top_k": (int, None),
    "f": (float, 1.1),
    "k": (int, None),
    "seed": (int, 0),
    "out": (str, None),
    "format": (str, "json"),
    # nmfqr
    "alpha": (float, 1.0),
    "beta": (float, 100.0),
    "gamma_sparse": (float, 1.0),
    "epsilon": (float, 1e-8),
    "knn_k": (int, 5),
    "bandwidth": (float, None),
    "max_iters": (int, 200),
    "rank_k": (int, None),
    # ga
    "omega_weight": (float, 0.8),
    "population": (int, 50),
    "generations": (int, 100),
    "crossover_rate": (float, 0.9),
    "mutation_rate": (float, None),
    "tournament_size": (int, 3),
    "elitism": (int, 2),
    # evaluation
    "classifier": (str, "knn"),
    "classifier_k": (int, 5),
    "tree_max_depth": (int, None),
    "tree_min_leaf": (int, 1),
    "folds": (int, 5),
    "positive_class": (int, 1),
    "features": (str, None),
    # f-sweep
    "f_min": (float, 1.02),
    "f_max": (float, 1.30),
    "f_step": (float, 0.02),
}


@dataclass
class RunConfig:
    """Fully resolved run options; echoed verbatim into every report."""

    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def to_dict(self) -> dict:
        return dict(self.values)


@dataclass
class Report:
    config: dict
    selection: dict | None = None
    evaluation: dict | None = None
    sweep: list | None = None
    factorization: dict | None = None
    timing: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool": "qrfs",
            "version": __version__,
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "selection": self.selection,
            "evaluation": self.evaluation,
            "sweep": self.sweep,
            "factorization": self.factorization,
            "timing": self.timing,
            "warnings": self.warnings,
        }


def _read_grid(path: str, transpose: bool) -> list[list[str]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            grid = [row for row in csv.reader(fh)]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ValidationError(f"{path} is not valid UTF-8: {exc}") from exc
    grid = [row for row in grid if row]
    if len(grid) < 2:
        raise ValidationError(f"{path} needs a header row and at least one data row")
    width = len(grid[0])
    for line_no, row in enumerate(grid, start=1):
        if len(row) != width:
            raise ValidationError(
                f"{path} line {line_no}: expected {width} cells, found {len(row)}")
    if transpose:
        grid = [list(col) for col in zip(*grid)]
    return grid


def _parse_cell(raw: str, line_no: int, col_name: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValidationError(
            f"non-numeric cell at row {line_no}, column {col_name}: {raw!r}") from None
    if not np.isfinite(value):
        raise ValidationError(
            f"non-finite cell at row {line_no}, column {col_name}: {raw!r}")
    return value


def load_feature_csv(path: str, transpose: bool = False) -> tuple[np.ndarray, list[str]]:
    """Unlabeled loader: header row of feature names, numeric body.

    Row numbers in errors are file line numbers (header is line 1); with
    ``transpose`` they refer to the transposed grid.
    """
    grid = _read_grid(path, transpose)
    names = [cell.strip() for cell in grid[0]]
    rows = [[_parse_cell(cell, line_no, names[j]) for j, cell in enumerate(row)]
            for line_no, row in enumerate(grid[1:], start=2)]
    return np.array(rows, dtype=np.float64), names


def load_csv(path: str, label_spec, transpose: bool = False) -> LabeledDataset:
    """Load a samples-as-rows CSV with one label column.

    ``label_spec`` names the label column or gives its 0-based index. Labels
    are densely re-coded: numerically when every label parses as a number,
    lexicographically otherwise, with the code map kept on the dataset.
    Files shipped features-as-rows load with ``transpose=True``; the first
    column is then read as the header.
    """
    if label_spec is None:
        raise ValidationError("a label column is required, pass label_spec")
    grid = _read_grid(path, transpose)
    header = [cell.strip() for cell in grid[0]]
    if isinstance(label_spec, int) or (isinstance(label_spec, str) and label_spec.isdigit()
                                       and label_spec not in header):
        label_idx = int(label_spec)
        if not 0 <= label_idx < len(header):
            raise ValidationError(f"label column index {label_idx} out of range")
    else:
        try:
            label_idx = header.index(str(label_spec))
        except ValueError:
            raise ValidationError(
                f"label column {label_spec!r} not found in header {header}") from None
    feature_names = [h for j, h in enumerate(header) if j != label_idx]
    raw_labels, rows = [], []
    for line_no, row in enumerate(grid[1:], start=2):
        raw_labels.append(row[label_idx].strip())
        rows.append([_parse_cell(cell, line_no, header[j])
                     for j, cell in enumerate(row) if j != label_idx])
    distinct = sorted(set(raw_labels))
    try:
        distinct.sort(key=float)
    except ValueError:
        pass  # non-numeric labels stay in lexicographic order
    if len(distinct) < 2:
        raise ValidationError(f"label column holds {len(distinct)} class(es); need >= 2")
    code = {lab: i for i, lab in enumerate(distinct)}
    return LabeledDataset(x=np.array(rows, dtype=np.float64),
                          y=np.array([code[lab] for lab in raw_labels]),
                          class_count=len(distinct),
                          feature_names=tuple(feature_names),
                          label_names=tuple(distinct))


def _parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ValidationError(
                        f"{path} line {line_no}: expected key = value, got {text!r}")
                key, _, value = text.partition("=")
                out[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    return out


def _coerce(key: str, raw):
    if key not in _OPTION_SPEC:
        raise ValidationError(f"unknown configuration key {key!r}")
    typ, _ = _OPTION_SPEC[key]
    if raw is None or isinstance(raw, typ):
        return raw
    if typ is bool:
        if isinstance(raw, str):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return bool(raw)
    try:
        return typ(raw)
    except ValueError:
        raise ValidationError(f"configuration key {key!r}: cannot parse {raw!r}") from None


def resolve_config(cli_values: dict, config_path: str | None) -> RunConfig:
    """Merge command line > config file > defaults into one resolved mapping."""
    file_values = _parse_config_file(config_path) if config_path else {}
    resolved = {}
    for key, (_, default) in _OPTION_SPEC.items():
        if cli_values.get(key) is not None:
            resolved[key] = _coerce(key, cli_values[key])
        elif key in file_values:
            resolved[key] = _coerce(key, file_values[key])
        else:
            resolved[key] = default
    for key in file_values:
        if key not in _OPTION_SPEC:
            raise ValidationError(f"unknown configuration key {key!r} in config file")
    return RunConfig(values=resolved)


def _selection_dict(sel: SelectionResult) -> dict:
    return sel.to_dict()


def _load_for(cfg: RunConfig):
    t0 = time.perf_counter()
    if cfg.label_col is not None:
        data = load_csv(cfg.data, cfg.label_col, transpose=cfg.transpose)
        matrix, names = data.x, list(data.feature_names or ())
    else:
        data = None
        matrix, names = load_feature_csv(cfg.data, transpose=cfg.transpose)
    return data, matrix, names, time.perf_counter() - t0


def _classifier_spec(cfg: RunConfig) -> tuple:
    if cfg.classifier == "knn":
        return ("knn", {"k": cfg.classifier_k})
    if cfg.classifier == "tree":
        return ("tree", {"max_depth": cfg.tree_max_depth, "min_leaf": cfg.tree_min_leaf})
    raise ValidationError(f"unknown classifier {cfg.classifier!r}")


def _evaluate_selection(cfg: RunConfig, data: LabeledDataset, selected) -> dict:
    folds = dobscv_folds(data, cfg.folds, seed=cfg.seed)
    report = cross_validate(data, list(selected), _classifier_spec(cfg), folds,
                            positive_class=cfg.positive_class)
    return report.to_dict()


def run(cfg: RunConfig) -> Report:
    """Dispatch one resolved configuration and assemble its report."""
    report = Report(config=cfg.to_dict())
    if cfg.data is None:
        raise ValidationError("--data is required")
    data, matrix, names, load_s = _load_for(cfg)
    report.timing["load_s"] = load_s
    method = cfg.method

    if method in ("rrqr", "nmfqr", "qr-ga"):
        if cfg.top_k is None:
            raise ValidationError("--top-k is required for select")
        t0 = time.perf_counter()
        if method == "rrqr":
            sel = select_features_rrqr(matrix, k=cfg.top_k, f=cfg.f)
        elif method == "nmfqr":
            nmf_cfg = NmfQrConfig(alpha=cfg.alpha, beta=cfg.beta,
                                  gamma_sparse=cfg.gamma_sparse, epsilon=cfg.epsilon,
                                  knn_k=cfg.knn_k, kernel_bandwidth=cfg.bandwidth,
                                  max_iters=cfg.max_iters, seed=cfg.seed,
                                  rank_k=cfg.rank_k)
            sel = nmfqr_select(matrix, nmf_cfg, top_k=cfg.top_k)
        else:
            if data is None:
                raise ValidationError("qr-ga needs labels; pass --label-col")
            ga_cfg = GaConfig(omega_weight=cfg.omega_weight, population=cfg.population,
                              generations=cfg.generations,
                              crossover_rate=cfg.crossover_rate,
                              mutation_rate=cfg.mutation_rate,
                              tournament_size=cfg.tournament_size,
                              elitism=cfg.elitism, seed=cfg.seed,
                              cv_folds=cfg.folds, rrqr_f=cfg.f,
                              classifier=cfg.classifier)
            sel, ga = qr_ga_select(data, ga_cfg)
            report.warnings.append(
                f"ga evaluations: {ga.evaluations}, cache hits: {ga.cache_hits}")
        report.timing["select_s"] = time.perf_counter() - t0
        if sel.truncated:
            report.warnings.append(
                f"rank truncation: kept {len(sel.selected)} of the requested {cfg.top_k}")
        report.selection = _selection_dict(sel)
        if names:
            report.selection["feature_names"] = [names[i] for i in sel.selected]
        if data is not None and method != "qr-ga" and len(sel.selected):
            t0 = time.perf_counter()
            report.evaluation = _evaluate_selection(cfg, data, sel.selected)
            report.timing["evaluate_s"] = time.perf_counter() - t0
        elif data is not None and method == "qr-ga":
            t0 = time.perf_counter()
            report.evaluation = _evaluate_selection(cfg, data, sel.selected)
            report.timing["evaluate_s"] = time.perf_counter() - t0

    elif method == "evaluate":
        if data is None:
            raise ValidationError("evaluate needs labels; pass --label-col")
        if not cfg.features:
            raise ValidationError("evaluate needs --features, a comma-separated index list")
        selected = [int(tok) for tok in str(cfg.features).split(",") if tok.strip()]
        t0 = time.perf_counter()
        report.selection = {"selected": selected, "scores": [],
                            "method": "fixed", "params": {}, "truncated": False}
        report.evaluation = _evaluate_selection(cfg, data, selected)
        report.timing["evaluate_s"] = time.perf_counter() - t0

    elif method == "f-sweep":
        if data is None:
            raise ValidationError("f-sweep needs labels; pass --label-col")
        if cfg.top_k is None:
            raise ValidationError("--top-k is required for f-sweep")
        t0 = time.perf_counter()
        rows = []
        grid = np.arange(cfg.f_min, cfg.f_max + 1e-12, cfg.f_step)
        for f in grid:
            f = float(round(f, 10))
            sel = select_features_rrqr(matrix, k=cfg.top_k, f=f)
            fact = strong_rrqr(matrix, RrqrConfig(k=sel.params["effective_k"], f=f))
            ev = _evaluate_selection(cfg, data, sel.selected)
            rows.append({
                "f": f,
                "top_k": len(sel.selected),
                "accuracy": ev["pooled"]["metrics"].get("accuracy"),
                "g_mean": ev["pooled"]["metrics"].get("g_mean"),
                "certificate": fact.certificate,
                "swaps": fact.swaps_performed,
            })
        report.sweep = rows
        report.timing["sweep_s"] = time.perf_counter() - t0

    elif method == "factorize":
        k = cfg.k if cfg.k is not None else cfg.top_k
        if k is None:
            raise ValidationError("factorize needs --k (or --top-k)")
        t0 = time.perf_counter()
        fact = strong_rrqr(matrix, RrqrConfig(k=k, f=cfg.f))
        report.timing["factorize_s"] = time.perf_counter() - t0
        report.factorization = {
            "k": fact.k,
            "f": fact.f,
            "perm": [int(p) for p in fact.perm],
            "r11_diagonal": [float(d) for d in np.diag(fact.r11)],
            "certificate": fact.certificate,
            "swaps_performed": fact.swaps_performed,
        }

    else:
        raise ValidationError(f"unknown method {method!r}")

    if report.evaluation:
        for w in report.evaluation.get("warnings", []):
            if w not in report.warnings:
                report.warnings.append(w)
    return report


def _csv_rows(report: Report) -> list[list]:
    rows: list[list] = []
    if report.selection:
        rows.append(["[selection]"])
        names = report.selection.get("feature_names")
        rows.append(["rank", "feature_index", "score", "feature_name"])
        scores = report.selection.get("scores") or []
        for rank, idx in enumerate(report.selection["selected"]):
            score = scores[rank] if rank < len(scores) else ""
            rows.append([rank, idx, score, names[rank] if names else ""])
    if report.evaluation:
        rows.append(["[metrics]"])
        rows.append(["scope", "metric", "value"])
        for name, value in report.evaluation["pooled"]["metrics"].items():
            if name != "undefined":
                rows.append(["pooled", name, value])
        for i, fold in enumerate(report.evaluation["per_fold"]):
            for name, value in fold["metrics"].items():
                if name != "undefined":
                    rows.append([f"fold{i}", name, value])
    if report.sweep:
        rows.append(["[sweep]"])
        keys = list(report.sweep[0].keys())
        rows.append(keys)
        for row in report.sweep:
            rows.append([row[k] for k in keys])
    if report.factorization:
        rows.append(["[factorization]"])
        rows.append(["key", "value"])
        for key in ("k", "f", "certificate", "swaps_performed"):
            rows.append([key, report.factorization[key]])
        rows.append(["perm", " ".join(str(p) for p in report.factorization["perm"])])
        rows.append(["r11_diagonal",
                     " ".join(repr(d) for d in report.factorization["r11_diagonal"])])
    return rows


def report_json(report: Report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2)


def emit_report(report: Report, path: str | None, fmt: str = "json") -> str:
    """Serialize the report; returns the emitted text (also written to path)."""
    if fmt == "json":
        text = report_json(report) + "\n"
    elif fmt == "csv":
        import io
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(_csv_rows(report))
        text = buf.getvalue()
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    if path:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise ValidationError(f"cannot write report to {path}: {exc}") from exc
    return text


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="CSV dataset path")
    parser.add_argument("--label-col", dest="label_col",
                        help="label column name or index")
    parser.add_argument("--transpose", action="store_const", const=True, default=None,
                        help="input ships features-as-rows; transpose it")
    parser.add_argument("--top-k", dest="top_k", type=int, help="features to select")
    parser.add_argument("--f", type=float, help="strong-RRQR swap bound (> 1)")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--out", help="report output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), help="report format")
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--folds", type=int, help="cross-validation folds")
    parser.add_argument("--classifier", choices=("knn", "tree"))
    parser.add_argument("--classifier-k", dest="classifier_k", type=int,
                        help="k for the knn classifier slot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrfs",
        description="Feature selection via strong rank-revealing QR factorization")
    sub = parser.add_subparsers(dest="command", required=True)

    p_select = sub.add_parser("select", help="run one of the three selectors")
    p_select.add_argument("--method", choices=("rrqr", "nmfqr", "qr-ga"))
    _add_common(p_select)
    p_select.add_argument("--alpha", type=float, help="nmfqr structure weight")
    p_select.add_argument("--beta", type=float, help="nmfqr orthogonality weight")
    p_select.add_argument("--gamma-sparse", dest="gamma_sparse", type=float,
                          help="nmfqr sparsity weight")
    p_select.add_argument("--epsilon", type=float, help="nmfqr stability constant")
    p_select.add_argument("--knn-k", dest="knn_k", type=int,
                          help="nmfqr graph neighbors")
    p_select.add_argument("--bandwidth", type=float, help="nmfqr kernel bandwidth")
    p_select.add_argument("--max-iters", dest="max_iters", type=int)
    p_select.add_argument("--rank-k", dest="rank_k", type=int)
    p_select.add_argument("--omega-weight", dest="omega_weight", type=float)
    p_select.add_argument("--population", type=int)
    p_select.add_argument("--generations", type=int)
    p_select.add_argument("--crossover-rate", dest="crossover_rate", type=float)
    p_select.add_argument("--mutation-rate", dest="mutation_rate", type=float)
    p_select.add_argument("--tournament-size", dest="tournament_size", type=int)
    p_select.add_argument("--elitism", type=int)

    p_eval = sub.add_parser("evaluate", help="cross-validate a fixed selection")
    _add_common(p_eval)
    p_eval.add_argument("--features", help="comma-separated feature indices")
    p_eval.add_argument("--tree-max-depth", dest="tree_max_depth", type=int)
    p_eval.add_argument("--tree-min-leaf", dest="tree_min_leaf", type=int)
    p_eval.add_argument("--positive-class", dest="positive_class", type=int)

    p_sweep = sub.add_parser("f-sweep", help="accuracy versus the swap bound f")
    _add_common(p_sweep)
    p_sweep.add_argument("--f-min", dest="f_min", type=float)
    p_sweep.add_argument("--f-max", dest="f_max", type=float)
    p_sweep.add_argument("--f-step", dest="f_step", type=float)

    p_fact = sub.add_parser("factorize", help="dump a strong-RRQR summary")
    _add_common(p_fact)
    p_fact.add_argument("--k", type=int, help="factorization rank")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = resolve_config(args, config_path)
        if command == "select":
            if cfg.method is None:
                cfg.values["method"] = "rrqr"
        else:
            cfg.values["method"] = command
        report = run(cfg)
        text = emit_report(report, cfg.out, cfg.format)
        if not cfg.out:
            sys.stdout.write(text)
        return 0
    except (QrfsError, ValueError) as exc:
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stderr.write(json.dumps(error, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
