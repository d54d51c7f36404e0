"""Experiment orchestration: config, pipeline wiring and report files.

Stage order is fixed: clean, subsample, zero-day split, scaler, correlation
pruning, PCA, SMOTE (train only), optional grid search, final fit, timed
test evaluation. A paired run repeats the model stages with and without
SMOTE on one shared split and one shared preprocessing fit.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import seeding
from .classifiers import FAMILIES, ModelError, ModelSpec
from .dataset_io import (
    CategoryCount,
    CleaningSummary,
    Dataset,
    SynthConfig,
    category_counts,
    clean,
    load_csv,
    subsample,
    synthesize,
)
from .preprocess import (
    CorrelationRanking,
    PcaModel,
    Scaler,
    apply_scaler,
    constant_columns,
    correlation_rank,
    fit_pca,
    fit_scaler,
    kept_features,
    pca_transform,
)
from .smote import SmoteConfig, smote
from .tuning_eval import (
    DEFAULT_GRIDS,
    REPORT_COLUMNS,
    SCORINGS,
    GridSearchResult,
    HparamGrid,
    MetricsReport,
    grid_search,
    timed_fit_predict,
    trial_rows,
)
from .zeroday_split import INJECT_MODES, SplitPlan, make_split, select_zero_day_categories

SCHEMA_VERSION = 1
MODES = ("no_smote", "smote")
TRIAL_COLUMNS = ("model", "mode", "combo_index", "params", "fold") + REPORT_COLUMNS[2:]
BAR_COLUMNS = ("model", "mode", "metric", "value")
BAR_METRICS = ("accuracy", "recall", "precision", "f1", "roc_auc", "fpr", "zero_day_recall",
               "run_time_s")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


# ------------------------------------------------------------ config


@dataclass
class ModelEntry:
    family: str
    params: dict = field(default_factory=dict)
    # None: fit ``params`` directly; otherwise search this grid first
    grid: dict | None = None

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params),
                "grid": None if self.grid is None else {k: list(v) for k, v in self.grid.items()}}


def _default_models() -> list[ModelEntry]:
    return [ModelEntry(f) for f in FAMILIES]


@dataclass
class ExperimentConfig:
    csv_path: str | None = None
    has_header: bool = True
    synth: SynthConfig | None = None
    subsample_fraction: float = 1.0
    stratify_by: str = "category"
    train_fraction: float = 0.7
    zero_day_auto_n: int | None = 4
    zero_day_categories: list[str] | None = None
    inject_mode: str = "shuffled"
    min_abs_r: float = 0.03
    variance_threshold: float = 0.95
    smote: bool = True
    paired: bool = True
    smote_k: int = 5
    smote_target: str | float = "equalize"
    paper_faithful_scaling: bool = False
    models: list[ModelEntry] = field(default_factory=_default_models)
    cv_k: int = 5
    scoring: str = "accuracy"
    seed: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        # synthetic data is the default source
        if self.csv_path is None and self.synth is None:
            self.synth = SynthConfig()

    def validate(self) -> "ExperimentConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need((self.csv_path is None) != (self.synth is None),
             "exactly one data source (csv or synth) is required")
        need(0 < self.subsample_fraction <= 1, "subsample fraction must lie in (0, 1]")
        need(self.stratify_by in ("category", "label", "none"), "bad stratify_by")
        need(0 < self.train_fraction < 1, "train_fraction must lie in (0, 1)")
        need((self.zero_day_auto_n is None) != (self.zero_day_categories is None),
             "zero_day needs exactly one of auto_n or categories")
        if self.zero_day_auto_n is not None:
            need(self.zero_day_auto_n >= 1, "zero_day auto_n must be >= 1")
        else:
            need(len(self.zero_day_categories) > 0, "zero_day categories list is empty")
        need(self.inject_mode in INJECT_MODES, f"inject_mode must be one of {INJECT_MODES}")
        need(self.min_abs_r >= 0, "min_abs_r must be >= 0")
        need(0 < self.variance_threshold < 1, "variance_threshold must lie in (0, 1)")
        need(self.smote_k >= 1, "smote k_neighbors must be >= 1")
        need(self.cv_k >= 2, "cv_k must be >= 2")
        need(self.scoring in SCORINGS, f"scoring must be one of {SCORINGS}")
        need(len(self.models) > 0, "model list is empty")
        for m in self.models:
            try:
                ModelSpec(m.family, m.params)
                if m.grid is not None:
                    HparamGrid(m.family, m.grid)
                    for combo in HparamGrid(m.family, m.grid).combos():
                        ModelSpec(m.family, {**m.params, **combo})
            except (ModelError, ValueError) as exc:
                raise ConfigError(f"model {m.family}: {exc}") from exc
        return self

    @property
    def modes(self) -> tuple[str, ...]:
        if self.smote and self.paired:
            return MODES
        return ("smote",) if self.smote else ("no_smote",)

    def to_dict(self) -> dict:
        data: dict[str, Any]
        if self.csv_path is not None:
            data = {"csv": self.csv_path, "has_header": self.has_header}
        else:
            data = {"synth": self.synth.to_dict()}
        zd = ({"auto_n": self.zero_day_auto_n} if self.zero_day_auto_n is not None
              else {"categories": list(self.zero_day_categories)})
        return {
            "schema_version": SCHEMA_VERSION,
            "data": data,
            "subsample": {"fraction": self.subsample_fraction, "stratify_by": self.stratify_by},
            "train_fraction": self.train_fraction,
            "zero_day": zd,
            "inject_mode": self.inject_mode,
            "prune_min_abs_r": self.min_abs_r,
            "pca_variance_threshold": self.variance_threshold,
            "smote": {"enabled": self.smote, "paired": self.paired,
                      "k_neighbors": self.smote_k, "target": self.smote_target},
            "paper_faithful_scaling": self.paper_faithful_scaling,
            "models": [m.to_dict() for m in self.models],
            "cv_k": self.cv_k,
            "scoring": self.scoring,
            "seed": self.seed,
            "output_dir": self.out_dir,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
        known = {"schema_version", "data", "subsample", "train_fraction", "zero_day", "inject_mode",
                 "prune_min_abs_r", "pca_variance_threshold", "smote", "paper_faithful_scaling",
                 "models", "cv_k", "scoring", "seed", "output_dir"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            cfg = cls()
            data = doc.get("data", {"synth": {}})
            if ("csv" in data) == ("synth" in data):
                raise ConfigError("data must name exactly one of 'csv' or 'synth'")
            if "csv" in data:
                cfg.csv_path = str(data["csv"])
                cfg.synth = None
                cfg.has_header = bool(data.get("has_header", True))
            else:
                cfg.synth = SynthConfig(**data["synth"])
            sub = doc.get("subsample", {})
            cfg.subsample_fraction = float(sub.get("fraction", 1.0))
            cfg.stratify_by = sub.get("stratify_by", "category")
            cfg.train_fraction = float(doc.get("train_fraction", 0.7))
            zd = doc.get("zero_day", {"auto_n": 4})
            if ("auto_n" in zd) == ("categories" in zd):
                raise ConfigError("zero_day must give exactly one of 'auto_n' or 'categories'")
            cfg.zero_day_auto_n = int(zd["auto_n"]) if "auto_n" in zd else None
            cfg.zero_day_categories = list(zd["categories"]) if "categories" in zd else None
            cfg.inject_mode = doc.get("inject_mode", "shuffled")
            cfg.min_abs_r = float(doc.get("prune_min_abs_r", 0.03))
            cfg.variance_threshold = float(doc.get("pca_variance_threshold", 0.95))
            sm = doc.get("smote", {})
            cfg.smote = bool(sm.get("enabled", True))
            cfg.paired = bool(sm.get("paired", True))
            cfg.smote_k = int(sm.get("k_neighbors", 5))
            cfg.smote_target = sm.get("target", "equalize")
            cfg.paper_faithful_scaling = bool(doc.get("paper_faithful_scaling", False))
            if "models" in doc:
                cfg.models = []
                for m in doc["models"]:
                    grid = m.get("grid")
                    if grid == "default":
                        grid = DEFAULT_GRIDS[m["family"]]
                    cfg.models.append(ModelEntry(m["family"], dict(m.get("params") or {}), grid))
            cfg.cv_k = int(doc.get("cv_k", 5))
            cfg.scoring = doc.get("scoring", "accuracy")
            cfg.seed = int(doc.get("seed", 0))
            cfg.out_dir = doc.get("output_dir")
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


# ------------------------------------------------------------ report


@dataclass
class ModelResult:
    model: str
    mode: str
    report: MetricsReport
    zero_day_recall: float | None
    params: dict
    grid: GridSearchResult | None = None

    def row(self) -> dict:
        return self.report.row(self.model, self.mode)

    def to_dict(self) -> dict:
        d = {"model": self.model, "mode": self.mode, "params": _jsonable(self.params)}
        d.update(self.report.to_dict())
        d["zero_day_recall"] = self.zero_day_recall
        if self.grid is not None:
            d["grid_best_score"] = self.grid.best_score
            d["grid_scoring"] = self.grid.scoring
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cleaning: CleaningSummary | None = None
    counts: list[CategoryCount] = field(default_factory=list)
    zero_day_categories: list[str] = field(default_factory=list)
    plan: SplitPlan | None = None
    dropped_constant: list[str] = field(default_factory=list)
    scaler: Scaler | None = None
    ranking: CorrelationRanking | None = None
    kept: list[str] = field(default_factory=list)
    pca: PcaModel | None = None
    feature_correlations: tuple[list[str], np.ndarray] | None = None
    resampling: dict[str, dict] = field(default_factory=dict)
    results: list[ModelResult] = field(default_factory=list)
    test_zero_day_share: float | None = None
    failed_stage: str | None = None
    error: str | None = None

    def result(self, model: str, mode: str) -> ModelResult:
        for r in self.results:
            if r.model == model and r.mode == mode:
                return r
        raise KeyError((model, mode))

    def metric_rows(self) -> list[dict]:
        return [r.row() for r in self.results]

    def trial_rows(self) -> list[dict]:
        rows = []
        for r in self.results:
            if r.grid is not None:
                rows.extend(trial_rows(r.grid, r.model, r.mode))
        return rows

    def bar_rows(self) -> list[dict]:
        rows = []
        for r in self.results:
            d = r.to_dict()
            for m in BAR_METRICS:
                rows.append({"model": r.model, "mode": r.mode, "metric": m, "value": d.get(m)})
        return rows

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "failed_stage": self.failed_stage,
            "error": self.error,
            "cleaning": self.cleaning.to_dict() if self.cleaning else None,
            "category_counts": [
                {"category": c.category, "count": c.count, "percentage": c.percentage}
                for c in self.counts
            ],
            "zero_day_categories": self.zero_day_categories,
            "test_zero_day_share": self.test_zero_day_share,
            "split": None if self.plan is None else {
                "n_train": int(self.plan.train_indices.size),
                "n_test": int(self.plan.test_indices.size),
                "inject_mode": self.plan.inject_mode,
            },
            "dropped_constant_features": self.dropped_constant,
            "kept_features": self.kept,
            "correlation_with_label": None if self.ranking is None else dict(self.ranking.entries),
            "pca": None if self.pca is None else {
                "n_components": self.pca.n_components,
                "explained_variance_ratio": self.pca.explained_variance_ratio.tolist(),
                "variance_threshold": self.pca.variance_threshold,
            },
            "resampling": self.resampling,
            "results": [r.to_dict() for r in self.results],
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ------------------------------------------------------------ pipeline


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, CleaningSummary]:
    if cfg.csv_path is not None:
        raw = load_csv(cfg.csv_path, has_header=cfg.has_header)
    else:
        raw = synthesize(cfg.synth)
    return clean(raw)


def _zero_day_recall(y_pred, test_zd_mask) -> float | None:
    if not test_zd_mask.any():
        return None
    return float(np.mean(y_pred[test_zd_mask] == 1))


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the full pipeline; on failure raise ``StageError`` naming the stage.

    When ``cfg.out_dir`` is set, reports are written there, including the
    partial report of a failed run.
    """
    cfg.validate()
    rep = ExperimentReport(cfg)
    stage = {"name": ""}

    @contextmanager
    def step(name):
        stage["name"] = name
        yield

    try:
        with step("load"):
            d, rep.cleaning = load_data(cfg)
        with step("subsample"):
            if cfg.subsample_fraction < 1:
                d = subsample(d, cfg.subsample_fraction, cfg.seed, cfg.stratify_by)
            rep.counts = category_counts(d)
        with step("split"):
            if cfg.zero_day_auto_n is not None:
                zd = select_zero_day_categories(rep.counts, cfg.zero_day_auto_n)
            else:
                zd = set(cfg.zero_day_categories)
            rep.zero_day_categories = sorted(zd)
            plan = make_split(d, cfg.train_fraction, zd, cfg.seed, cfg.inject_mode)
            rep.plan = plan
            train_ids = plan.train_indices
            test_ids = plan.test_indices
            test_zd = np.isin(d.attack_cat[test_ids], list(zd))
            rep.test_zero_day_share = float(test_zd.mean())
            fit_ids = train_ids if not cfg.paper_faithful_scaling else np.arange(d.n_rows)
        with step("scale"):
            const = constant_columns(d.features[fit_ids])
            keep_cols = np.setdiff1d(np.arange(d.n_features), const)
            rep.dropped_constant = [d.feature_names[j] for j in const]
            names = [d.feature_names[j] for j in keep_cols]
            X_all = d.features[:, keep_cols]
            rep.scaler = fit_scaler(X_all[fit_ids])
            Z_all = apply_scaler(rep.scaler, X_all)
        with step("prune"):
            rep.ranking = correlation_rank(Z_all[fit_ids], d.label[fit_ids], names)
            rep.kept = kept_features(rep.ranking, cfg.min_abs_r)
            cols = [names.index(n) for n in rep.kept]
            Z_all = Z_all[:, cols]
            with np.errstate(invalid="ignore", divide="ignore"):
                cm = np.corrcoef(np.column_stack([Z_all[fit_ids], d.label[fit_ids]]), rowvar=False)
            rep.feature_correlations = (rep.kept + ["label"], np.nan_to_num(cm))
        with step("pca"):
            rep.pca = fit_pca(Z_all[fit_ids], cfg.variance_threshold)
            P_all = pca_transform(rep.pca, Z_all)
            X_train, y_train = P_all[train_ids], d.label[train_ids]
            X_test, y_test = P_all[test_ids], d.label[test_ids]

        test_set = set(test_ids.tolist())
        for mode in cfg.modes:
            with step(f"smote[{mode}]"):
                if mode == "smote":
                    res = smote(X_train, y_train,
                                SmoteConfig(cfg.smote_k, cfg.smote_target, cfg.seed))
                    # provenance: every row fed to training traces to train ids
                    parents = np.concatenate([
                        train_ids[res.minority_rows[res.base]],
                        train_ids[res.minority_rows[res.neighbor]],
                    ])
                    assert not test_set.intersection(parents.tolist()), "SMOTE touched test rows"
                    Xm, ym = res.X, res.y
                    rep.resampling[mode] = dict(res.summary, n_synthetic=res.n_synthetic)
                else:
                    Xm, ym = X_train, y_train
                    n1 = int(y_train.sum())
                    rep.resampling[mode] = {
                        "zeros_before": int(y_train.size - n1), "ones_before": n1,
                        "zeros_after": int(y_train.size - n1), "ones_after": n1,
                        "n_synthetic": 0,
                    }
                assert not test_set.intersection(train_ids.tolist())
            model_seed = seeding.stage_seed(cfg.seed, seeding.MODEL)
            for entry in cfg.models:
                with step(f"grid[{entry.family},{mode}]"):
                    gres = None
                    params = dict(entry.params)
                    if entry.grid is not None:
                        gres = grid_search(entry.family, HparamGrid(entry.family, entry.grid),
                                           Xm, ym, cfg.cv_k, cfg.seed, cfg.scoring, entry.params)
                        params.update(gres.best_params)
                with step(f"fit[{entry.family},{mode}]"):
                    spec = ModelSpec(entry.family, params, model_seed)
                    _, labels, _, mrep = timed_fit_predict(spec, (Xm, ym), (X_test, y_test))
                rep.results.append(ModelResult(
                    entry.family, mode, mrep, _zero_day_recall(labels, test_zd),
                    spec.resolved(), gres,
                ))
    except Exception as exc:
        rep.failed_stage = stage["name"]
        rep.error = f"{type(exc).__name__}: {exc}"
        if cfg.out_dir:
            try:
                emit_reports(rep, cfg.out_dir)
            except OSError:
                pass
        raise StageError(stage["name"], exc) from exc

    if cfg.out_dir:
        emit_reports(rep, cfg.out_dir)
    return rep


# ------------------------------------------------------------ writing


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: "" if r.get(c) is None else r.get(c) for c in columns})
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def emit_reports(report: ExperimentReport, out_dir) -> list[Path]:
    """Write every report file into ``out_dir``; returns the paths written.

    Each file is written to a temporary name and renamed into place. A
    failed run writes whatever its stages produced, plus the error.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {
        "config.json": _json_text(report.config.to_dict()),
        "report.json": _json_text(report.to_dict()),
    }
    if report.cleaning is not None:
        files["cleaning_summary.json"] = report.cleaning.to_json() + "\n"
    if report.plan is not None:
        files["split_plan.json"] = report.plan.to_json() + "\n"
    if report.scaler is not None:
        files["scaler.json"] = _json_text(report.scaler.to_dict())
    if report.ranking is not None:
        files["correlations.csv"] = _csv_text(
            ("feature", "r"), [{"feature": f, "r": r} for f, r in report.ranking.entries]
        )
    if report.feature_correlations is not None:
        names, mat = report.feature_correlations
        rows = [dict({"feature": n}, **dict(zip(names, row.tolist()))) for n, row in zip(names, mat)]
        files["correlation_matrix.csv"] = _csv_text(["feature"] + names, rows)
    if report.pca is not None:
        files["pca.json"] = report.pca.to_json() + "\n"
    if report.resampling:
        files["resampling.json"] = _json_text(report.resampling)
    if report.results or report.failed_stage is None:
        files["metrics.csv"] = _csv_text(REPORT_COLUMNS, report.metric_rows())
        files["trials.csv"] = _csv_text(TRIAL_COLUMNS, report.trial_rows())
        files["bars.csv"] = _csv_text(BAR_COLUMNS, report.bar_rows())
    written = []
    for name in sorted(files):
        p = out / name
        _atomic_write(p, files[name])
        written.append(p)
    return written


def format_table(report: ExperimentReport) -> str:
    """Plain-text metrics table, one line per (model, mode)."""
    head = f"{'model':<5} {'mode':<9} {'acc':>7} {'recall':>7} {'prec':>7} {'f1':>7} " \
           f"{'auc':>7} {'fpr':>7} {'zd_rec':>7} {'time_s':>8}"
    lines = [head]

    def f(v):
        return f"{v:7.4f}" if v is not None else f"{'-':>7}"

    for r in report.results:
        m = r.report
        lines.append(
            f"{r.model:<5} {r.mode:<9} {f(m.accuracy)} {f(m.recall)} {f(m.precision)} {f(m.f1)} "
            f"{f(m.roc_auc)} {f(m.fpr)} {f(r.zero_day_recall)} {m.total_time_seconds:8.2f}"
        )
    return "\n".join(lines)
