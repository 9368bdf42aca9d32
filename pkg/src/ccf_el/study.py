"""Command runners and the reproducible study harness.

Every runner takes a :class:`StudyConfig` and returns a :class:`Report`; writing it out is left to the outputs.
Monte-Carlo replicate ``k`` draws its path from child ``k`` of the study seed and its bootstrap from a child of that
child, so results do not depend on the number of workers.
"""

import json
import logging
import os
import time
from collections import Counter
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import StudyConfig
from .errors import CcfElError, ConfigError, StudyError
from .estimate import minimize_el
from .grid import build_grid
from .likelihood import LOGLIK_REGISTRY, mle_fit
from .models import MONTHLY, Model, ModelKind, ModelSpec
from .outputs import Report, dump_json
from .sample_io import ingest_csv, summary_statistics
from .simulate import SeedLike, child_seeds, make_rng, simulate_path
from .spec_test import bootstrap_test
from .types import ESTIMATE_MODE, SamplePath

_logger = logging.getLogger(__name__)

MAX_FAILED_SHARE = 0.05
MANIFEST = "manifest.json"

CASE_STUDY_MODELS = (ModelKind.VSK, ModelKind.CIR, ModelKind.VSK_MJ, ModelKind.IG_OU)
CASE_STUDY_BANDWIDTHS = (0.010, 0.012, 0.014, 0.016, 0.018)

# IG-OU stand-in for the monthly 3-month T-bill series: mean 0.065, SD 0.026
TBILL_THETA = (0.224, 0.637, 9.81)
TBILL_N = 410
TBILL_SEED = 1965


def synthetic_tbill(seed: SeedLike = TBILL_SEED) -> SamplePath:
    spec = ModelSpec(ModelKind.IG_OU, TBILL_THETA, MONTHLY)
    return simulate_path(spec, TBILL_N, make_rng(seed), seed=seed if isinstance(seed, int) else None)


def _theta_init(config: StudyConfig, kind: str) -> Optional[tuple]:
    if not config.theta:
        return None
    return ModelSpec.from_params(kind, config.theta, config.delta).theta


def _load_data(config: StudyConfig) -> SamplePath:
    return ingest_csv(config.input, config.delta)


def _require_univariate(kind: str):
    if Model.lookup(kind).dim != 1:
        raise ConfigError(f"The specification test handles univariate models only, not {kind}")


def _fit(kind: str, estimator: str, data: SamplePath, theta_init=None, covariance: bool = True):
    if estimator == "el":
        grid = build_grid(data, kind, ESTIMATE_MODE)
        return minimize_el(kind, data, grid, theta_init=theta_init, covariance=covariance)
    return mle_fit(kind, data, theta_init=theta_init)


def run_simulate(config: StudyConfig, tbill: bool = False) -> Report:
    if tbill:
        seed = TBILL_SEED if config.seed is None else config.seed
        spec = ModelSpec(ModelKind.IG_OU, TBILL_THETA, MONTHLY)
        data = synthetic_tbill(seed)
    else:
        seed = config.seed
        spec = config.model_spec()
        data = simulate_path(spec, config.n, make_rng(seed), seed=seed)
    frame = pd.DataFrame(data.observations.reshape(data.n, -1), columns=["x"] if data.dim == 1 else ["x1", "x2"])
    frame.insert(0, "t", np.arange(1, data.n + 1))
    document = {
        "command": "simulate",
        "model": spec.kind,
        "theta": spec.params,
        "delta": spec.delta,
        "seed": seed,
        "n_jumps": data.n_jumps,
        "summary": summary_statistics(data),
    }
    return Report(f"simulate-{spec.kind}", "simulate", document, {"path": frame})


def run_estimate(config: StudyConfig) -> Report:
    kind = Model.lookup(config.target_model).kind
    if config.estimator != "el":
        config.likelihood_kind()
    data = _load_data(config)
    result = _fit(kind, config.estimator, data, theta_init=_theta_init(config, kind))
    document = {"command": "estimate", "input": config.input, **result.to_dict()}
    return Report(f"estimate-{kind}-{config.estimator}", "estimate", document, result.tables())


def run_test(config: StudyConfig) -> Report:
    kind = Model.lookup(config.target_model).kind
    _require_univariate(kind)
    data = _load_data(config)
    result = bootstrap_test(
        kind,
        data,
        B=config.bootstrap,
        alpha=config.alpha,
        bandwidths=config.explicit_bandwidths(),
        seed=config.seed,
        n_jobs=config.threads,
    )
    document = {"command": "test", "input": config.input, **result.to_dict()}
    return Report(f"test-{kind}", "test", document, result.tables())


class ReplicateOutcome(NamedTuple):
    index: int
    estimates: Dict[str, np.ndarray]
    standard_errors: Dict[str, Optional[np.ndarray]]
    bandwidths: Optional[np.ndarray] = None
    rejects: Optional[np.ndarray] = None
    reject: Optional[bool] = None
    error: Optional[str] = None


def replicate_seeds(seed: SeedLike, reps: int):
    """Path seed and bootstrap seed of every replicate"""
    return [(child, child.spawn(1)[0]) for child in child_seeds(seed, reps)]


def _mc_replicate(config: StudyConfig, index: int, path_seed, test_seed) -> ReplicateOutcome:
    kind = Model.lookup(config.target_model).kind
    estimates, standard_errors = {}, {}
    try:
        data = simulate_path(config.model_spec(), config.n, make_rng(path_seed))
        fit = _fit(kind, "el", data)
        estimates["el"], standard_errors["el"] = fit.theta_hat, fit.standard_errors
        if config.baseline:
            baseline = mle_fit(kind, data)
            estimates[baseline.method], standard_errors[baseline.method] = baseline.theta_hat, baseline.standard_errors
        if config.null_model is None:
            return ReplicateOutcome(index, estimates, standard_errors)
        test = bootstrap_test(
            kind,
            data,
            B=config.bootstrap,
            alpha=config.alpha,
            bandwidths=config.explicit_bandwidths(),
            seed=test_seed,
        )
    except CcfElError as err:
        _logger.warning(f"Replicate {index} failed: {type(err).__name__}: {err}")
        return ReplicateOutcome(index, {}, {}, error=type(err).__name__)
    rejects = np.asarray(test.bandwidth_p_values) <= config.alpha
    return ReplicateOutcome(index, estimates, standard_errors, np.asarray(test.bandwidths), rejects, test.reject)


def _estimate_rows(config: StudyConfig, outcomes: List[ReplicateOutcome]) -> pd.DataFrame:
    spec = config.model_spec()
    kind = Model.lookup(config.target_model).kind
    names = Model.lookup(kind).param_names
    truth = spec.params if spec.kind == kind else {}
    rows = []
    for method in outcomes[0].estimates:
        values = np.array([o.estimates[method] for o in outcomes])
        missing = np.full(len(names), np.nan)
        errors = np.array(
            [missing if o.standard_errors[method] is None else o.standard_errors[method] for o in outcomes]
        )
        for i, name in enumerate(names):
            column = pd.Series(values[:, i])
            rows.append(
                {
                    "method": method,
                    "parameter": name,
                    "true": truth.get(name, np.nan),
                    "mean": column.mean(),
                    "sd": column.std(),
                    "mean_se": pd.Series(errors[:, i]).mean(),
                    "replicates": len(outcomes),
                }
            )
    return pd.DataFrame(rows)


def _replicate_rows(config: StudyConfig, outcomes: List[ReplicateOutcome]) -> pd.DataFrame:
    names = Model.lookup(config.target_model).param_names
    rows = [
        {"replicate": o.index, "method": method, **dict(zip(names, theta))}
        for o in outcomes
        for method, theta in o.estimates.items()
    ]
    return pd.DataFrame(rows)


def _rejection_rows(outcomes: List[ReplicateOutcome]) -> pd.DataFrame:
    rejects = np.array([o.rejects for o in outcomes], dtype=float)
    bandwidths = np.array([o.bandwidths for o in outcomes])
    rows = [
        {"label": f"h{i + 1}", "mean_bandwidth": bandwidths[:, i].mean(), "rejection_rate": rejects[:, i].mean()}
        for i in range(rejects.shape[1])
    ]
    rows.append(
        {"label": "overall", "mean_bandwidth": np.nan, "rejection_rate": float(np.mean([o.reject for o in outcomes]))}
    )
    return pd.DataFrame(rows)


def run_mc_study(config: StudyConfig) -> Report:
    """Replicates of simulate, estimate and (with a null model) test, aggregated per parameter and bandwidth"""
    if config.null_model is not None:
        _require_univariate(config.null_model)
    kind = Model.lookup(config.target_model).kind
    if config.baseline and kind not in LOGLIK_REGISTRY:
        raise ConfigError(f"No likelihood baseline is available for {kind}")
    start = time.perf_counter()
    _logger.info(f"Monte-Carlo study: {config.reps} replicates of {config.model} n={config.n}, fitting {kind}")

    outcomes = Parallel(n_jobs=config.threads)(
        delayed(_mc_replicate)(config, index, path_seed, test_seed)
        for index, (path_seed, test_seed) in enumerate(replicate_seeds(config.seed, config.reps))
    )
    failures = Counter(o.error for o in outcomes if o.error is not None)
    n_failed = sum(failures.values())
    if n_failed > MAX_FAILED_SHARE * config.reps:
        raise StudyError(f"{n_failed} of {config.reps} replicates failed: {dict(sorted(failures.items()))}")
    done = [o for o in outcomes if o.error is None]

    tables = {"estimates": _estimate_rows(config, done), "replicates": _replicate_rows(config, done)}
    document = {
        "command": "mc-study",
        "model": config.model,
        "null_model": config.null_model,
        "fitted_model": kind,
        "theta": config.model_spec().params,
        "n": config.n,
        "delta": config.delta,
        "reps": config.reps,
        "completed": len(done),
        "failures": dict(sorted(failures.items())),
        "seed": config.seed,
        "estimates": tables["estimates"].to_dict(orient="records"),
    }
    if config.null_model is not None:
        tables["rejection"] = _rejection_rows(done)
        document["alpha"] = config.alpha
        document["bootstrap"] = config.bootstrap
        document["rejection"] = tables["rejection"].to_dict(orient="records")
    _logger.info(f"Monte-Carlo study done in {time.perf_counter() - start:.1f}s, {n_failed} failed replicates")
    return Report(f"mc-study-{config.model}", "mc-study", document, tables)


def _case_estimate_rows(kind: str, el, likelihood) -> List[dict]:
    names = Model.lookup(kind).param_names
    el_se = el.standard_errors
    rows = []
    for i, name in enumerate(names):
        rows.append(
            {
                "model": kind,
                "parameter": name,
                "el": el.theta_hat[i],
                "el_se": el_se[i] if el_se is not None else np.nan,
                "likelihood": likelihood.theta_hat[i] if likelihood is not None else np.nan,
                "likelihood_se": likelihood.standard_errors[i] if likelihood is not None else np.nan,
                "likelihood_method": likelihood.method if likelihood is not None else "",
            }
        )
    return rows


def run_case_study(config: StudyConfig) -> Report:
    """EL and likelihood fits of the four univariate models plus a bootstrap test of each as the null"""
    if config.input is not None:
        data, source = _load_data(config), config.input
    else:
        _logger.warning("No --in given, using the synthetic T-bill stand-in")
        data, source = synthetic_tbill(), "synthetic"
    bandwidths = config.explicit_bandwidths() or CASE_STUDY_BANDWIDTHS
    start = time.perf_counter()

    models, estimate_rows, test_rows, overall_rows = {}, [], [], []
    for kind, test_seed in zip(CASE_STUDY_MODELS, child_seeds(config.seed, len(CASE_STUDY_MODELS))):
        kind = kind.value
        _logger.info(f"Case study: {kind}")
        el = _fit(kind, "el", data)
        likelihood = None
        if kind in LOGLIK_REGISTRY:
            try:
                likelihood = mle_fit(kind, data)
            except CcfElError as err:
                _logger.warning(f"Likelihood fit of {kind} failed: {type(err).__name__}: {err}")
        test = bootstrap_test(
            kind,
            data,
            B=config.bootstrap,
            alpha=config.alpha,
            bandwidths=bandwidths,
            seed=test_seed,
            n_jobs=config.threads,
        )
        models[kind] = {
            "el": el.to_dict(),
            "likelihood": likelihood.to_dict() if likelihood is not None else None,
            "test": test.to_dict(),
        }
        estimate_rows.extend(_case_estimate_rows(kind, el, likelihood))
        test_rows.append(test.tables()["statistics"].assign(bootstrap_q95=test.plot_rows()["bootstrap_q95"]))
        test_rows[-1].insert(0, "model", kind)
        overall_rows.append({"model": kind, "t_stat": test.t_stat, "p_value": test.p_value, "reject": test.reject})

    tables = {
        "estimates": pd.DataFrame(estimate_rows),
        "tests": pd.concat(test_rows, ignore_index=True),
        "overall": pd.DataFrame(overall_rows),
    }
    document = {
        "command": "case-study",
        "input": source,
        "data": summary_statistics(data),
        "bandwidths": list(bandwidths),
        "alpha": config.alpha,
        "bootstrap": config.bootstrap,
        "seed": config.seed,
        "models": models,
    }
    _logger.info(f"Case study done in {time.perf_counter() - start:.1f}s")
    return Report("case-study", "case-study", document, tables)


COMMAND_RUNNERS = {
    "simulate": run_simulate,
    "estimate": run_estimate,
    "test": run_test,
    "mc-study": run_mc_study,
    "case-study": run_case_study,
}


def prepare_output_dir(out: str, config_hash: str, force: bool = False):
    """Refuse to overwrite results of another configuration unless ``force``"""
    manifest = os.path.join(out, MANIFEST)
    if os.path.exists(manifest):
        with open(manifest) as f:
            existing = json.load(f).get("config_hash")
        if existing != config_hash and not force:
            raise ConfigError(f"{out} holds results of another configuration ({existing}), use --force to overwrite")
        if existing != config_hash:
            _logger.warning(f"Overwriting results of configuration {existing} in {out}")
    os.makedirs(out, exist_ok=True)


def write_manifest(out: str, config: StudyConfig, wall_time: float, files: List[str]):
    manifest = {
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "seed": config.seed,
        "wall_time": round(wall_time, 3),
        "files": sorted(files),
    }
    with open(os.path.join(out, MANIFEST), "w") as f:
        f.write(dump_json(manifest))
    _logger.info(f"Wrote {os.path.join(out, MANIFEST)}")
