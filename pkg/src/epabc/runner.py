"""Batch experiment runner: validate a config, wire model + oracle + engine +
corrections + baseline, and emit reproducible artifacts.

A run writes into its output directory:

* run_meta.json  - resolved config, package version, seed, wall time
* posterior.json - prior/site/global parameters, marginals, evidence, counters
                   (byte-identical across runs with equal config/seed/threads)
* trace.csv      - one row per site visit
* corrected_marginals.csv, chain.csv, predictive.csv - when enabled
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import MCMCABCConfig, mcmc_abc
from .composite import composite_target, make_blocks
from .corrections import PWOAccumulator, default_grid, pwo_first_order
from .engine import EPConfig, EPState, log_evidence, run_ep
from .errors import ConfigError, IncompatibleRuns
from .gauss import MomentGaussian, NaturalGaussian, cholesky_spd, to_moments
from .models import (
    FoldedMeanIID,
    GaussianIID,
    LotkaVolterra,
    RaceBlocks,
    RaceDifficult,
    StableIID,
    generate_folded_dataset,
    generate_gaussian_dataset,
    generate_lv_dataset,
    generate_stable_dataset,
    generate_sv_dataset,
    transform_params,
)
from .moments import (
    BasicMomentOracle,
    QmcTable,
    RecycledMomentOracle,
    SamplingConfig,
    SiteTarget,
    ball_log_volume,
)
from .rng import child_rng

MODEL_IDS = (
    "gaussian_iid",
    "multimodal_toy",
    "alpha_stable",
    "lotka_volterra",
    "race",
    "race_difficult",
    "sv",
)

_SECTION_KEYS = {
    "model": {"id", "n", "params", "data", "true_params"},
    "prior": {"mean", "cov"},
    "kernel": {"epsilon", "norm", "summary"},
    "sampling": {"m_batch", "m_min", "m_cap", "ess_min", "use_qmc", "qmc_table_len", "recycle"},
    "ep": {"passes", "alpha", "min_pass_for_full_update", "on_failure"},
    "composite": {"l"},
    "corrections": {"pwo", "coords"},
    "baseline": {"iterations", "epsilon", "summary", "proposal_scale_fraction", "thin"},
    "predictive": {"draws"},
}
_TOP_KEYS = set(_SECTION_KEYS) | {"seed", "output"}


def _check_keys(name: str, obj: dict, allowed: set) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown fields in {name}: {sorted(unknown)}")


def load_config(path) -> dict:
    """Parse and validate a JSON experiment config; unknown fields are errors."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(cfg)


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys("config", cfg, _TOP_KEYS)
    for section in ("model", "prior", "kernel"):
        if section not in cfg:
            raise ConfigError(f"config is missing the required '{section}' section")
    if "seed" not in cfg:
        raise ConfigError("config is missing 'seed'")
    for section, allowed in _SECTION_KEYS.items():
        value = cfg.get(section)
        if value is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"section '{section}' must be an object")
        _check_keys(section, value, allowed)
    model = cfg["model"]
    if model.get("id") not in MODEL_IDS:
        raise ConfigError(f"unknown model id {model.get('id')!r}; expected one of {MODEL_IDS}")
    if cfg["kernel"].get("epsilon") is None:
        raise ConfigError("kernel.epsilon is required")
    if model.get("id") == "sv" and not cfg.get("composite"):
        raise ConfigError("model 'sv' requires a composite section with block length l")
    return cfg


def _prior_from_config(prior_cfg: dict) -> NaturalGaussian:
    mean = np.asarray(prior_cfg["mean"], dtype=np.float64)
    cov_raw = np.asarray(prior_cfg["cov"], dtype=np.float64)
    cov = np.diag(cov_raw) if cov_raw.ndim == 1 else cov_raw
    mom = MomentGaussian(mean, cov)
    from .gauss import to_natural

    return to_natural(mom)


@dataclass
class RunSetup:
    """Everything the engine needs, plus bookkeeping for artifacts."""

    model_id: str
    target: SiteTarget
    sampling: SamplingConfig
    ep: EPConfig
    summaryless: bool                     # identity-summary indicator kernel?
    recycle: bool = False
    truth_theta: Optional[np.ndarray] = None
    condition: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def _read_csv_rows(path: Path) -> list[list[float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return [[float(v) for v in row] for row in reader], header


def load_dataset(model_id: str, path) -> tuple[list, Optional[np.ndarray]]:
    """Observed chunks from CSV; race models also return the condition column."""
    rows, _header = _read_csv_rows(Path(path))
    if model_id in ("race", "race_difficult"):
        condition = np.array([int(r[0]) for r in rows], dtype=np.int64)
        chunks = [np.array([r[1], r[2]]) for r in rows]
        return chunks, condition
    if model_id == "lotka_volterra":
        return [np.array(r) for r in rows], None
    return [np.array([r[0]]) for r in rows], None


def generate_dataset(cfg: dict, seed: int) -> tuple[list, Optional[np.ndarray], Optional[np.ndarray]]:
    """Synthesize (chunks, condition, truth_theta) from model.true_params."""
    model = cfg["model"]
    mid = model["id"]
    n = int(model.get("n") or 0)
    params = model.get("params") or {}
    true_params = model.get("true_params")
    if true_params is None:
        raise ConfigError(f"model.data is absent, so model.true_params is required for {mid}")
    rng = child_rng(seed, 0, 1)
    if mid == "gaussian_iid":
        theta = np.array([float(true_params[0])])
        data = generate_gaussian_dataset(theta[0], n, rng, sigma=float(params.get("sigma", 1.0)))
        return data, None, theta
    if mid == "multimodal_toy":
        theta = np.array([float(true_params[0])])
        return generate_folded_dataset(theta[0], n, rng), None, theta
    if mid == "alpha_stable":
        native = np.asarray(true_params, dtype=np.float64)
        return generate_stable_dataset(native, n, rng), None, transform_params("alpha_stable", native)
    if mid == "lotka_volterra":
        native = np.asarray(true_params, dtype=np.float64)
        y0 = params.get("y0", [20, 30])
        return generate_lv_dataset(native, y0, n, rng), None, transform_params("lotka_volterra", native)
    if mid == "sv":
        native = np.asarray(true_params, dtype=np.float64)
        return generate_sv_dataset(native, n, rng), None, transform_params("sv", native)
    if mid == "race":
        k = int(params.get("conditions", 1))
        trials = int(params.get("trials_per_condition", n // max(k, 1)))
        condition = np.repeat(np.arange(k), trials)
        native = np.asarray(true_params, dtype=np.float64)
        theta = transform_params("race", native)
        proto = RaceBlocks(condition, [np.zeros(2)] * condition.size, n_conditions=k,
                           consts=_race_consts(params))
        data = proto.simulate_dataset(theta, rng)
        return data, condition, theta
    if mid == "race_difficult":
        native = np.asarray(true_params, dtype=np.float64)
        theta = transform_params("race_difficult", native)
        proto = RaceDifficult([np.zeros(2)] * n, c2=float(params.get("c2", 10.0)),
                              s=float(params.get("s", 0.0)), consts=_race_consts(params))
        data = proto.simulate_dataset(theta, rng)
        return data, np.zeros(n, dtype=np.int64), theta
    raise ConfigError(f"unknown model id {mid!r}")


def _race_consts(params: dict):
    from .models import RaceConstants

    keys = ("tau", "a", "b", "lapse", "ceiling", "lapse_ceiling", "dt")
    overrides = {k: float(params[k]) for k in keys if k in params}
    return RaceConstants(**overrides)


def build_setup(cfg: dict, seed: int, base_dir: Optional[Path] = None) -> RunSetup:
    model = cfg["model"]
    mid = model["id"]
    params = model.get("params") or {}
    prior = _prior_from_config(cfg["prior"])
    kernel = cfg["kernel"]
    sampling_cfg = dict(cfg.get("sampling") or {})
    recycle = bool(sampling_cfg.pop("recycle", False))
    sampling = SamplingConfig(
        epsilon=float(kernel["epsilon"]),
        norm=str(kernel.get("norm", "euclidean")),
        **{k: v for k, v in sampling_cfg.items() if v is not None},
    )
    ep_cfg = cfg.get("ep") or {}
    ep = EPConfig(
        passes=int(ep_cfg.get("passes", 4)),
        alpha=float(ep_cfg.get("alpha", 1.0)),
        min_pass_for_full_update=ep_cfg.get("min_pass_for_full_update"),
        on_failure=str(ep_cfg.get("on_failure", "skip_site")),
    )

    truth_theta = None
    condition = None
    if model.get("data"):
        data_path = Path(model["data"])
        if base_dir is not None and not data_path.is_absolute():
            data_path = base_dir / data_path
        chunks, condition = load_dataset(mid, data_path)
    else:
        chunks, condition, truth_theta = generate_dataset(cfg, seed)

    extra: dict = {}
    if mid == "gaussian_iid":
        sim = GaussianIID(chunks, sigma=float(params.get("sigma", 1.0)))
        target = SiteTarget(prior, sim, chunks)
        summaryless = True
    elif mid == "multimodal_toy":
        sim = FoldedMeanIID(chunks)
        target = SiteTarget(prior, sim, chunks)
        summaryless = True
    elif mid == "alpha_stable":
        sim = StableIID(chunks)
        target = SiteTarget(prior, sim, chunks)
        summaryless = True
    elif mid == "lotka_volterra":
        sim = LotkaVolterra(chunks, y0=params.get("y0", [20, 30]),
                            max_events=int(params.get("max_events", 20_000)))
        target = SiteTarget(prior, sim, chunks)
        summaryless = True
    elif mid == "race":
        if condition is None:
            raise ConfigError("race model requires condition labels (CSV column or generated)")
        k = int(params.get("conditions", int(condition.max()) + 1))
        sim = RaceBlocks(condition, chunks, n_conditions=k, consts=_race_consts(params))
        target = SiteTarget(prior, sim, chunks)
        summaryless = False
    elif mid == "race_difficult":
        sim = RaceDifficult(chunks, c2=float(params.get("c2", 10.0)),
                            s=float(params.get("s", 0.0)), consts=_race_consts(params))
        target = SiteTarget(prior, sim, chunks)
        summaryless = False
    elif mid == "sv":
        scheme = make_blocks(len(chunks), int(cfg["composite"]["l"]))
        target = composite_target(prior, chunks, scheme)
        extra["block_scheme"] = {"l": scheme.l, "n_s": scheme.n_s, "ranges": [list(r) for r in scheme.ranges]}
        summaryless = True
    else:
        raise ConfigError(f"unknown model id {mid!r}")

    return RunSetup(
        model_id=mid,
        target=target,
        sampling=sampling,
        ep=ep,
        summaryless=summaryless,
        truth_theta=truth_theta,
        condition=condition,
        extra=extra,
        recycle=recycle,
    )


@dataclass
class RunResult:
    state: EPState
    setup: RunSetup
    oracle: object
    posterior: dict
    out_dir: Path


def volume_correction(setup: RunSetup) -> float:
    if not setup.summaryless:
        return 0.0
    sim = setup.target.sim
    eps, norm = setup.sampling.epsilon, setup.sampling.norm
    return float(sum(ball_log_volume(eps, sim.chunk_dim(i), norm) for i in range(setup.target.n)))


def _floatify(obj):
    if isinstance(obj, np.ndarray):
        return [_floatify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _floatify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_floatify(v) for v in obj]
    return obj


def _json_dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_floatify(obj), sort_keys=True, indent=1) + "\n")


def run_experiment(cfg: dict, out_dir, seed: Optional[int] = None, threads: int = 1,
                   base_dir: Optional[Path] = None) -> RunResult:
    """Execute one configured run and write all artifacts into out_dir."""
    cfg = validate_config(cfg)
    seed = int(cfg["seed"] if seed is None else seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()

    setup = build_setup(cfg, seed, base_dir=base_dir)
    sim = setup.target.sim
    collect = bool((cfg.get("corrections") or {}).get("pwo"))
    table = QmcTable(setup.sampling.qmc_table_len, sim.d) if setup.sampling.use_qmc else None
    oracle_cls = RecycledMomentOracle if setup.recycle else BasicMomentOracle
    oracle = oracle_cls(setup.target, setup.sampling, table=table, threads=threads,
                        collect_final_pass=collect)

    z_final: dict[int, float] = {}

    def visit_hook(pass_index, site, estimate, outcome, state):
        if pass_index == setup.ep.passes and estimate is not None:
            z_final[site] = float(estimate.z_hat)

    state = run_ep(setup.target, oracle, setup.ep, seed, visit_hook=visit_hook)

    log_vol = volume_correction(setup)
    raw_evidence = log_evidence(state, 0.0)
    corrected_evidence = raw_evidence - log_vol
    mom = to_moments(state.global_nat)

    posterior = {
        "model": setup.model_id,
        "n_sites": setup.target.n,
        "theta_dim": sim.d,
        "prior": {"r": state.prior.r, "Q": state.prior.Q},
        "global": {
            "natural": {"r": state.global_nat.r, "Q": state.global_nat.Q},
            "moment": {"mean": mom.mu, "cov": mom.Sigma},
        },
        "marginals": [
            {"coord": j, "mean": float(mom.mu[j]), "sd": float(np.sqrt(mom.Sigma[j, j]))}
            for j in range(sim.d)
        ],
        "sites": [
            {"r": s.nat.r, "Q": s.nat.Q, "log_c": s.log_c} for s in state.sites
        ],
        "log_evidence_raw": raw_evidence,
        "log_volume_correction": log_vol,
        "log_evidence": corrected_evidence,
        "skips": state.skips,
        "sim_draws_total": int(getattr(oracle, "sims_total", 0)),
        "sim_draws_by_pass": {str(k): int(v) for k, v in getattr(oracle, "sims_by_pass", {}).items()},
        "z_hat_final_pass": {
            "mean": float(np.mean(list(z_final.values()))) if z_final else None,
            "var": float(np.var(list(z_final.values()))) if z_final else None,
        },
    }
    if setup.extra:
        posterior["extra"] = setup.extra
    _json_dump(out / "posterior.json", posterior)

    _write_trace(out / "trace.csv", state)

    if collect:
        _write_corrections(out / "corrected_marginals.csv", cfg, state, oracle, mom, setup)

    if cfg.get("baseline"):
        _run_baseline(out / "chain.csv", cfg, setup, mom, seed)

    if cfg.get("predictive"):
        _write_predictive(out / "predictive.csv", cfg, setup, mom, seed)

    meta = {
        "config": cfg,
        "seed": seed,
        "threads": threads,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t_start,
        "truth_theta": setup.truth_theta,
    }
    _json_dump(out / "run_meta.json", meta)
    return RunResult(state=state, setup=setup, oracle=oracle, posterior=posterior, out_dir=out)


def _write_trace(path: Path, state: EPState) -> None:
    d = state.prior.d
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pass", "site", "skipped", "reason", "min_eigenvalue"]
                        + [f"mean_{j}" for j in range(d)])
        for row in state.trace:
            writer.writerow([row.pass_index, row.site_index, int(row.skipped), row.reason,
                             repr(row.min_eigenvalue)] + [repr(float(v)) for v in row.mean])


def _write_corrections(path: Path, cfg, state, oracle, mom: MomentGaussian, setup: RunSetup) -> None:
    coords = (cfg.get("corrections") or {}).get("coords") or list(range(setup.target.sim.d))
    acc = PWOAccumulator(n_sites=setup.target.n, q=mom)
    for site, (idx, thetas, weights, z_hat) in getattr(oracle, "harvest", {}).items():
        acc.record(site, idx, thetas, weights, z_hat)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coord", "grid", "q_cdf", "corrected_cdf_raw", "corrected_cdf", "density"])
        for coord in coords:
            grid = default_grid(mom, int(coord))
            result = pwo_first_order(acc, int(coord), grid)
            for j in range(grid.shape[0]):
                writer.writerow([coord, repr(float(grid[j])), repr(float(result.q_cdf[j])),
                                 repr(float(result.corrected_cdf_raw[j])),
                                 repr(float(result.corrected_cdf[j])),
                                 repr(float(result.density[j]))])


def _baseline_summary(name: str):
    if name == "dataset_mean":
        return lambda dataset: np.array([np.mean(np.concatenate([np.atleast_1d(c) for c in dataset]))])
    if name == "rt_quantiles":
        from .models import rt_dataset_summary

        return rt_dataset_summary
    raise ConfigError(f"unknown baseline summary {name!r}")


def _run_baseline(path: Path, cfg, setup: RunSetup, mom: MomentGaussian, seed: int) -> None:
    bl = cfg["baseline"]
    sim = setup.target.sim
    scales = float(bl.get("proposal_scale_fraction", 0.3)) * np.sqrt(np.diag(mom.Sigma))
    mcfg = MCMCABCConfig(
        summary=_baseline_summary(str(bl.get("summary", "dataset_mean"))),
        epsilon=float(bl["epsilon"]),
        proposal_scales=scales,
        iterations=int(bl.get("iterations", 10_000)),
        init=mom.mu.copy(),
        thin=int(bl.get("thin", 1)),
    )
    result = mcmc_abc(sim, mcfg, setup.target.prior, child_rng(seed, 0, 2), record_all=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + [f"theta_{j}" for j in range(sim.d)] + ["accepted"])
        for it, theta, accepted in result.path:
            writer.writerow([it] + [repr(float(v)) for v in theta] + [int(accepted)])
    meta = {"acceptance_rate": result.acceptance_rate, "accepted": result.accepted,
            "iterations": result.iterations,
            "chain_mean": result.chain.mean(axis=0), "chain_sd": result.chain.std(axis=0)}
    _json_dump(path.with_name("chain_meta.json"), meta)


def _write_predictive(path: Path, cfg, setup: RunSetup, mom: MomentGaussian, seed: int) -> None:
    draws = int(cfg["predictive"].get("draws", 100))
    sim = setup.target.sim
    rng = child_rng(seed, 0, 3)
    l, _ = cholesky_spd(mom.Sigma, "posterior covariance")
    race_like = setup.model_id in ("race", "race_difficult")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if race_like:
            writer.writerow(["draw", "chunk", "condition", "choice", "rt_ms"])
        else:
            width = max(sim.chunk_dim(i) for i in range(sim.n))
            writer.writerow(["draw", "chunk"] + [f"c{j}" for j in range(width)])
        for k in range(draws):
            theta = mom.mu + l @ rng.standard_normal(sim.d)
            dataset = sim.simulate_dataset(theta, rng)
            for i, chunk in enumerate(dataset):
                if race_like:
                    cond = int(setup.condition[i]) if setup.condition is not None else 0
                    writer.writerow([k, i, cond, int(chunk[0]), repr(float(chunk[1]))])
                else:
                    writer.writerow([k, i] + [repr(float(v)) for v in np.atleast_1d(chunk)])


def write_dataset_csv(cfg: dict, path, seed: Optional[int] = None) -> Path:
    """Synthesize the config's dataset and write it in the ingestion format."""
    cfg = validate_config(cfg)
    seed = int(cfg["seed"] if seed is None else seed)
    chunks, condition, _ = generate_dataset(cfg, seed)
    mid = cfg["model"]["id"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if mid in ("race", "race_difficult"):
            writer.writerow(["condition", "choice", "rt_ms"])
            for i, chunk in enumerate(chunks):
                cond = int(condition[i]) if condition is not None else 0
                writer.writerow([cond, int(chunk[0]), repr(float(chunk[1]))])
        elif mid == "lotka_volterra":
            writer.writerow(["y1", "y2"])
            for chunk in chunks:
                writer.writerow([repr(float(chunk[0])), repr(float(chunk[1]))])
        else:
            writer.writerow(["y"])
            for chunk in chunks:
                writer.writerow([repr(float(np.atleast_1d(chunk)[0]))])
    return path


def compare_runs(run_dirs) -> str:
    """Side-by-side CSV of posterior marginals, evidence and costs."""
    dirs = [Path(d) for d in run_dirs]
    if len(dirs) < 2:
        raise IncompatibleRuns("comparison needs at least two completed runs")
    posts, metas = [], []
    for d in dirs:
        try:
            posts.append(json.loads((d / "posterior.json").read_text()))
            metas.append(json.loads((d / "run_meta.json").read_text()))
        except OSError as exc:
            raise IncompatibleRuns(f"run directory {d} is incomplete: {exc}") from exc
    models = {p["model"] for p in posts}
    if len(models) != 1:
        raise IncompatibleRuns(f"runs use different models: {sorted(models)}")

    lines = ["run,model,coord,mean,sd,log_evidence,wall_time_s,sim_draws,z_hat_var"]
    for d, post, meta in zip(dirs, posts, metas):
        zvar = post.get("z_hat_final_pass", {}).get("var")
        for marg in post["marginals"]:
            lines.append(
                f"{d},{post['model']},{marg['coord']},{marg['mean']!r},{marg['sd']!r},"
                f"{post['log_evidence']!r},{meta['wall_time_s']!r},{post['sim_draws_total']},"
                f"{'' if zvar is None else repr(zvar)}"
            )
    return "\n".join(lines) + "\n"
