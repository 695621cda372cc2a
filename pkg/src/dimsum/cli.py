"""Command line pipeline: stage subcommands that read and write plain JSON
artifacts under one output directory, ending in a consolidated report.

Every stage writes the resolved config next to its artifacts and embeds the
config hash, so a report can refuse to mix results from different setups.
Given the same config and seed the artifact bytes are identical run to run
and independent of the thread count.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .artifacts import (
    config_hash,
    read_json,
    read_jsonl,
    require_artifact,
    window_from_record,
    window_record,
    write_csv,
    write_json,
    write_jsonl,
)
from .assignment import assign_incomplete
from .clustering import ClusterModel, find_optimal_k
from .core import ConfigError, MaskVector, PacConfig, derive_rng
from .ingest import (
    IngestSpec,
    MissingnessSpec,
    SyntheticSpec,
    gen_mcar,
    gen_mnar,
    gen_synthetic,
    load_series,
)
from .masksearch import (
    ClusterTask,
    MaskSearchConfig,
    min_mask_search,
    split_validation,
    train_final,
)
from .pac import pac_sample_bound, validate_cluster
from .patterns import ProjectedSample, bernoulli_mask_gen, structure_test
from .windowing import WindowedCorpus, normalize_corpus, partition

TRACE_HEADER = ["m", "l_oracle", "sigma", "l_real", "gap"]

STAGES = ("synth", "preprocess", "cluster", "assign", "train", "validate", "report", "mask")


# ---------------------------------------------------------------------------
# configuration


def _coerce_field(f, value):
    """Type-check one config value; file-loaded JSON bypasses argparse."""
    if f.name == "input":
        if not isinstance(value, (list, tuple)) or not all(isinstance(p, str) for p in value):
            raise ConfigError("input must be a list of path strings")
        return value
    if f.name == "clamp":
        ok = value is None or (
            isinstance(value, (list, tuple))
            and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        )
        if not ok:
            raise ConfigError("clamp must be two numbers or null")
        return value
    if f.name == "iters":
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError("iters must be an integer or null")
        return value
    # annotations are strings under future-import, so the expected type
    # comes from each field's default value, same as the flag parser
    want = type(f.default)
    if want is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{f.name} must be true or false")
        return value
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{f.name} must be an integer")
        return value
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{f.name} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{f.name} must be a string")
    return value


@dataclass(frozen=True)
class RunConfig:
    """Flat bag of every knob the pipeline takes; one file, one hash."""

    seed: int = 0
    output_dir: str = "out"
    threads: int = 1
    # ingest
    input: tuple[str, ...] = ()
    input_format: str = "csv"
    interval: float = 900.0
    clamp: tuple[float, float] | None = None
    fail_fast: bool = True
    # windowing + clustering
    w: int = 96
    k_min: int = 2
    k_max: int = 16
    batch_size: int = 1024
    iters: int | None = None
    # learning guarantee
    epsilon: float = 0.03
    delta: float = 0.1
    tau_frac: float = 0.1
    gamma_min: float = 0.2
    # artificial-mask search
    m_min: float = 0.01
    growth: float = 1.0
    max_steps: int = 10
    oracle_runs: int = 5
    val_fraction: float = 0.2
    explore_full: bool = False
    # training
    imputer: str = "linear"
    assign_mask_ratio: float = 0.1
    train_cap: str = "pac"
    # synthetic corpora
    n_series: int = 1000
    noise_std: float = 0.05
    incomplete_fraction: float = 0.3
    missing_kind: str = "mcar"
    missing_rate: float = 0.3
    run_p: float = 0.2
    # mask injection
    mask_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(self.input))
        if self.clamp is not None:
            object.__setattr__(self, "clamp", (float(self.clamp[0]), float(self.clamp[1])))
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.train_cap not in ("pac", "all"):
            raise ConfigError("train_cap must be 'pac' or 'all'")
        if not 0.0 <= self.mask_fraction <= 1.0:
            raise ConfigError("mask_fraction must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        coerced = {f.name: _coerce_field(f, data[f.name]) for f in fields(cls) if f.name in data}
        return cls(**coerced)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def pac_config(self) -> PacConfig:
        return PacConfig(self.epsilon, self.delta, self.tau_frac, self.gamma_min)

    def mask_config(self) -> MaskSearchConfig:
        return MaskSearchConfig(
            m_min=self.m_min,
            growth=self.growth,
            max_steps=self.max_steps,
            oracle_runs=self.oracle_runs,
            val_fraction=self.val_fraction,
            explore_full=self.explore_full,
        )

    def ingest_spec(self) -> IngestSpec:
        return IngestSpec(
            paths=self.input,
            fmt=self.input_format,
            interval=self.interval,
            clamp=self.clamp,
            fail_fast=self.fail_fast,
        )

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)


def parallel_map(fn, items, threads: int) -> list:
    """Ordered map; results are reduced in input order regardless of N."""
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# artifact loading shared by stages


def _load_corpus(cfg: RunConfig) -> WindowedCorpus:
    path = require_artifact(cfg.path("windows.jsonl"), "dimsum preprocess")
    stats = read_json(require_artifact(cfg.path("stats.json"), "dimsum preprocess"))
    complete, incomplete = [], []
    for rec in read_jsonl(path):
        win = window_from_record(rec)
        (complete if win.is_complete else incomplete).append(win)
    return WindowedCorpus(
        tuple(complete), tuple(incomplete), int(stats["w"]), float(stats["sigma_data"])
    )


def _load_cluster_model(cfg: RunConfig) -> ClusterModel:
    data = read_json(require_artifact(cfg.path("clusters.json"), "dimsum cluster"))
    return ClusterModel(
        k=int(data["k"]),
        centroids=np.asarray(data["centroids"], dtype=np.float64),
        assignments={k: int(v) for k, v in data["assignments"].items()},
        sigma=np.asarray(data["sigma"], dtype=np.float64),
        centroid_dists=np.asarray(data["centroid_dists"], dtype=np.float64),
        seed=int(data["seed"]),
    )


def _record_runtime(cfg: RunConfig, stage: str, seconds: float) -> None:
    path = cfg.path("runtimes.json")
    data = read_json(path) if os.path.exists(path) else {}
    data[stage] = seconds
    write_json(path, data)


# ---------------------------------------------------------------------------
# stage implementations


def cmd_synth(cfg: RunConfig) -> None:
    missingness = None
    if cfg.incomplete_fraction > 0:
        missingness = MissingnessSpec(cfg.missing_kind, cfg.missing_rate, cfg.run_p)
    spec = SyntheticSpec(
        n_series=cfg.n_series,
        w=cfg.w,
        noise_std=cfg.noise_std,
        incomplete_fraction=cfg.incomplete_fraction,
        missingness=missingness,
        interval=cfg.interval,
    )
    series, meta = gen_synthetic(spec, cfg.seed)

    def rows():
        for s in series:
            for i, v in enumerate(s.values):
                yield {
                    "id": s.series_id,
                    "t": s.start + i * s.interval,
                    "v": None if math.isnan(v) else float(v),
                }

    n = write_jsonl(cfg.path("corpus.jsonl"), rows())
    write_json(cfg.path("meta.json"), {"config_hash": cfg.hash(), **meta})
    print(f"synth: {len(series)} series, {n} readings, {len(meta['incomplete_ids'])} incomplete")


def cmd_preprocess(cfg: RunConfig) -> None:
    if not cfg.input:
        raise ConfigError("no input files given; pass --input or set it in the config")
    try:
        series = load_series(cfg.ingest_spec())
    except FileNotFoundError as exc:
        raise ConfigError(f"input file not found: {exc.filename}") from None
    if not series:
        raise ConfigError("no series found in the input files")
    corpus = partition(series, cfg.w)
    if corpus.total == 0:
        raise ConfigError(f"no windows produced; every series is shorter than w={cfg.w}")
    windows = sorted(corpus.complete + corpus.incomplete, key=lambda x: x.key)
    write_jsonl(cfg.path("windows.jsonl"), (window_record(win) for win in windows))
    hidden = sum(int((win.mask == 0).sum()) for win in corpus.incomplete)
    stats = {
        "config_hash": cfg.hash(),
        "n_series": len(series),
        "n_complete": len(corpus.complete),
        "n_incomplete": len(corpus.incomplete),
        "total": corpus.total,
        "w": corpus.w,
        "sigma_data": corpus.sigma_data,
        "missing_rate": hidden / (corpus.total * corpus.w),
    }
    write_json(cfg.path("stats.json"), stats)
    print(
        f"preprocess: {stats['n_complete']} complete + {stats['n_incomplete']} incomplete "
        f"windows of length {corpus.w}"
    )


def cmd_cluster(cfg: RunConfig) -> None:
    corpus = normalize_corpus(_load_corpus(cfg))
    complete = list(corpus.complete)
    if cfg.k_max > len(complete):
        raise ConfigError(
            f"k_max={cfg.k_max} exceeds the {len(complete)} complete windows; lower it"
        )
    k_star, model = find_optimal_k(
        complete, cfg.k_min, cfg.k_max, seed=cfg.seed, batch_size=cfg.batch_size, iters=cfg.iters
    )
    write_json(
        cfg.path("clusters.json"),
        {
            "config_hash": cfg.hash(),
            "k": model.k,
            "centroids": model.centroids,
            "assignments": model.assignments,
            "sigma": model.sigma,
            "centroid_dists": model.centroid_dists,
            "seed": model.seed,
        },
    )
    print(f"cluster: k*={k_star} over {len(complete)} complete windows")


def cmd_assign(cfg: RunConfig) -> None:
    corpus = normalize_corpus(_load_corpus(cfg))
    model = _load_cluster_model(cfg)
    state = assign_incomplete(
        model,
        list(corpus.incomplete),
        cfg.pac_config(),
        cfg.assign_mask_ratio,
        cfg.seed,
        threads=cfg.threads,
    )
    write_json(cfg.path("assignment.json"), {"config_hash": cfg.hash(), **state.as_dict()})
    print(
        f"assign: {state.scanned} incomplete windows over {len(state.clusters)} clusters"
        f" (early exit: {state.early_exit})"
    )


def _build_tasks(cfg: RunConfig, corpus: WindowedCorpus, model: ClusterModel) -> list[dict]:
    """Deterministic per-cluster training setups shared by train and validate.

    Each entry carries the (possibly capped) complete members, the structure
    verdict on the cluster's missing patterns, and the seeded ClusterTask.
    Clusters with fewer than 2 usable complete windows are marked skipped.
    """
    assignment = read_json(require_artifact(cfg.path("assignment.json"), "dimsum assign"))
    by_key = {win.key: win for win in corpus.complete}
    incomplete_by_key = {win.key: win for win in corpus.incomplete}
    membership: dict[str, int] = {}
    gammas_by_cluster: dict[int, list[float]] = {}
    for ca in assignment["clusters"]:
        for key in ca["members"]:
            membership[key] = int(ca["cluster"])
        gammas_by_cluster[int(ca["cluster"])] = [float(g) for g in ca["gammas"]]
    n_req = pac_sample_bound(cfg.pac_config())

    out = []
    for c in range(model.k):
        member_keys = model.members(c)
        pattern_keys = sorted(k for k, cl in membership.items() if cl == c)
        patterns = {k: incomplete_by_key[k].mask_vector for k in pattern_keys}
        structure = structure_test(patterns, cfg.seed)
        used_patterns = patterns if structure.accepted else {}

        capped_keys = list(member_keys)
        if cfg.train_cap == "pac" and member_keys:
            gammas = gammas_by_cluster.get(c, [])
            gamma_hat = float(np.mean(gammas)) if gammas else 1.0 - cfg.assign_mask_ratio
            n_needed = math.ceil(n_req / gamma_hat)
            # the holdout split eats val_fraction, so scale the cap up to
            # leave n_needed actual training rows
            cap = max(2, math.ceil(n_needed / (1.0 - cfg.val_fraction)))
            if cap < len(member_keys):
                order = derive_rng(cfg.seed, "traincap", c).permutation(len(member_keys))
                capped_keys = sorted(member_keys[int(i)] for i in order[:cap])

        task = None
        skip_reason = None
        if len(capped_keys) < 2:
            skip_reason = "fewer than 2 complete member windows"
        else:
            task = ClusterTask(
                cluster=c,
                targets=tuple(by_key[k] for k in capped_keys),
                patterns=used_patterns,
                imputer_spec=cfg.imputer,
                seed=int(derive_rng(cfg.seed, "task", c).integers(2**31 - 1)),
            )
        out.append(
            {
                "cluster": c,
                "task": task,
                "structure": structure,
                "n_members": len(member_keys),
                "n_patterns": len(patterns),
                "capped_to": len(capped_keys),
                "skip_reason": skip_reason,
            }
        )
    return out


def cmd_train(cfg: RunConfig) -> None:
    corpus = normalize_corpus(_load_corpus(cfg))
    model = _load_cluster_model(cfg)
    entries = _build_tasks(cfg, corpus, model)
    mask_cfg = cfg.mask_config()

    def work(entry):
        if entry["task"] is None:
            return None
        trace = min_mask_search(entry["task"], mask_cfg)
        final_model, final_loss = train_final(entry["task"], mask_cfg, trace.m_star)
        return trace, final_model, final_loss

    results = parallel_map(work, entries, cfg.threads)

    clusters = {}
    states = {}
    used = 0
    for entry, result in zip(entries, results):
        c = entry["cluster"]
        row = {
            "structure": entry["structure"].as_dict(),
            "n_members": entry["n_members"],
            "n_patterns": entry["n_patterns"],
            "capped_to": entry["capped_to"],
            "skip_reason": entry["skip_reason"],
        }
        if result is None:
            row.update({"m_star": None, "converged": None, "final_loss": None})
            states[str(c)] = None
        else:
            trace, final_model, final_loss = result
            used += trace.n_train_targets
            row.update(
                {
                    "m_star": trace.m_star,
                    "converged": trace.converged,
                    "sigma_floored": trace.sigma_floored,
                    "n_train_targets": trace.n_train_targets,
                    "n_val": trace.n_val,
                    "final_loss": final_loss,
                }
            )
            states[str(c)] = final_model.state_dict()
            write_csv(
                cfg.path(f"trace_k{c}.csv"),
                TRACE_HEADER,
                [[r.m, r.l_oracle, r.sigma, r.l_real, r.gap] for r in trace.rows],
            )
        clusters[str(c)] = row

    write_json(
        cfg.path("training.json"),
        {
            "config_hash": cfg.hash(),
            "train_cap": cfg.train_cap,
            "imputer": cfg.imputer,
            "total_windows": corpus.total,
            "training_windows_used": used,
            "clusters": clusters,
        },
    )
    write_json(cfg.path("models.json"), {"config_hash": cfg.hash(), "clusters": states})
    print(f"train: {used} training windows across {model.k} clusters (cap: {cfg.train_cap})")


def _validation_samples(task: ClusterTask, mask_cfg: MaskSearchConfig, m_star: float):
    """Holdout windows carrying one pattern each plus artificial hiding at
    the chosen rate; the guarantee is checked on these reconstructions."""
    _, val = split_validation(task, mask_cfg)
    keys = sorted(task.patterns)
    gen = bernoulli_mask_gen(m_star, task.seed, "pacval")
    samples = []
    for j, win in enumerate(val):
        source = keys[j % len(keys)] if keys else None
        proj = task.patterns[source] if source else MaskVector.ones(win.w)
        bare = ProjectedSample(
            source_id=source, target_id=win.key, ground_truth=win.values, proj_mask=proj
        )
        samples.append(
            ProjectedSample(
                source_id=source,
                target_id=win.key,
                ground_truth=win.values,
                proj_mask=proj,
                art_mask=gen(j, bare),
            )
        )
    return samples


def cmd_validate(cfg: RunConfig) -> None:
    corpus = normalize_corpus(_load_corpus(cfg))
    model = _load_cluster_model(cfg)
    training = read_json(require_artifact(cfg.path("training.json"), "dimsum train"))
    entries = _build_tasks(cfg, corpus, model)
    mask_cfg = cfg.mask_config()
    pac_cfg = cfg.pac_config()
    tau = cfg.tau_frac * corpus.sigma_data

    def work(entry):
        c = str(entry["cluster"])
        trained = training["clusters"].get(c, {})
        m_star = trained.get("m_star")
        if entry["task"] is None or m_star is None:
            return validate_cluster(None, [], pac_cfg, cfg.m_min, tau)
        final_model, _ = train_final(entry["task"], mask_cfg, float(m_star))
        samples = _validation_samples(entry["task"], mask_cfg, float(m_star))
        return validate_cluster(final_model, samples, pac_cfg, float(m_star), tau)

    reports = parallel_map(work, entries, cfg.threads)
    write_json(
        cfg.path("pac.json"),
        {
            "config_hash": cfg.hash(),
            "tau": tau,
            "clusters": {str(e["cluster"]): r.as_dict() for e, r in zip(entries, reports)},
        },
    )
    verdicts = [r.verdict for r in reports]
    print(f"validate: verdicts {dict((v, verdicts.count(v)) for v in sorted(set(verdicts)))}")


def cmd_report(cfg: RunConfig) -> None:
    stats = read_json(require_artifact(cfg.path("stats.json"), "dimsum preprocess"))
    clusters = read_json(require_artifact(cfg.path("clusters.json"), "dimsum cluster"))
    assignment = read_json(require_artifact(cfg.path("assignment.json"), "dimsum assign"))
    training = read_json(require_artifact(cfg.path("training.json"), "dimsum train"))
    pac = read_json(require_artifact(cfg.path("pac.json"), "dimsum validate"))

    hashes = {
        "stats.json": stats["config_hash"],
        "clusters.json": clusters["config_hash"],
        "assignment.json": assignment["config_hash"],
        "training.json": training["config_hash"],
        "pac.json": pac["config_hash"],
    }
    if len(set(hashes.values())) != 1:
        raise ConfigError(f"artifacts come from different configs: {hashes}")
    if next(iter(hashes.values())) != cfg.hash():
        raise ConfigError("artifacts were produced by a different config than the current one")

    incomplete_counts = {
        str(ca["cluster"]): len(ca["members"]) for ca in assignment["clusters"]
    }
    rows = []
    summary_clusters = {}
    for c in sorted(training["clusters"], key=int):
        trained = training["clusters"][c]
        pac_row = pac["clusters"].get(c, {})
        entry = {
            "n_complete_members": trained["n_members"],
            "n_incomplete_members": incomplete_counts.get(c, 0),
            "structure_accepted": trained["structure"]["accepted"],
            "m_star": trained["m_star"],
            "converged": trained.get("converged"),
            "final_loss": trained["final_loss"],
            "verdict": pac_row.get("verdict"),
            "pass_rate": pac_row.get("pass_rate"),
        }
        summary_clusters[c] = entry
        rows.append(
            [
                int(c),
                entry["n_complete_members"],
                entry["n_incomplete_members"],
                entry["structure_accepted"],
                entry["m_star"],
                entry["converged"],
                entry["final_loss"],
                entry["verdict"],
                entry["pass_rate"],
            ]
        )

    used = training["training_windows_used"]
    reduction = (stats["total"] / used) if used else None
    runtimes = {}
    if os.path.exists(cfg.path("runtimes.json")):
        runtimes = read_json(cfg.path("runtimes.json"))
    report = {
        "config_hash": cfg.hash(),
        "k": clusters["k"],
        "total_windows": stats["total"],
        "training_windows_used": used,
        "reduction_factor": reduction,
        "clusters": summary_clusters,
        "runtimes": runtimes,
    }
    write_json(cfg.path("report.json"), report)
    write_csv(
        cfg.path("report.csv"),
        [
            "cluster",
            "n_complete_members",
            "n_incomplete_members",
            "structure_accepted",
            "m_star",
            "converged",
            "final_loss",
            "verdict",
            "pass_rate",
        ],
        rows,
    )
    factor = f"{reduction:.1f}x" if reduction else "n/a"
    print(f"report: k={clusters['k']}, training reduction {factor}")


def cmd_mask(cfg: RunConfig) -> None:
    corpus = _load_corpus(cfg)
    complete = sorted(corpus.complete, key=lambda win: win.key)
    n_inject = int(round(cfg.mask_fraction * len(complete)))
    order = derive_rng(cfg.seed, "inject").permutation(len(complete))
    chosen = [complete[int(i)] for i in order[:n_inject]]
    if cfg.missing_kind == "mcar":
        injected = gen_mcar(chosen, cfg.missing_rate, cfg.seed)
    elif cfg.missing_kind in ("mnar-top", "mnar-burst"):
        injected = gen_mnar(chosen, cfg.missing_rate, cfg.missing_kind[len("mnar-") :], cfg.seed)
    else:
        raise ConfigError(f"unknown missing_kind {cfg.missing_kind!r} for injection")

    write_jsonl(cfg.path("mask_truth.jsonl"), (window_record(win) for win in chosen))
    replaced = {win.key: new for win, new in zip(chosen, injected)}
    windows = sorted(
        [replaced.get(win.key, win) for win in corpus.complete] + list(corpus.incomplete),
        key=lambda win: win.key,
    )
    write_jsonl(cfg.path("windows.jsonl"), (window_record(win) for win in windows))

    n_complete = sum(1 for win in windows if win.is_complete)
    hidden = sum(int((win.mask == 0).sum()) for win in windows)
    stats = read_json(require_artifact(cfg.path("stats.json"), "dimsum preprocess"))
    stats.update(
        {
            "config_hash": cfg.hash(),
            "n_complete": n_complete,
            "n_incomplete": len(windows) - n_complete,
            "missing_rate": hidden / (len(windows) * corpus.w),
            "injected_keys": sorted(w.key for w in chosen),
        }
    )
    write_json(cfg.path("stats.json"), stats)
    print(f"mask: injected {cfg.missing_kind} at rate {cfg.missing_rate} into {n_inject} windows")


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "cluster": cmd_cluster,
    "assign": cmd_assign,
    "train": cmd_train,
    "validate": cmd_validate,
    "report": cmd_report,
    "mask": cmd_mask,
}


# ---------------------------------------------------------------------------
# argument parsing


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


_FIELD_TYPES = {
    int: int,
    float: float,
    str: str,
    bool: _parse_bool,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dimsum", description="windowing, clustering, and imputer-training pipeline"
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub = subs.add_parser(name, help=f"run the {name} stage")
        sub.add_argument("--config", help="JSON config file; flags override it")
        for f in fields(RunConfig):
            flag = "--" + f.name.replace("_", "-")
            if f.name == "input":
                sub.add_argument(flag, nargs="+", default=None, metavar="PATH")
            elif f.name == "clamp":
                sub.add_argument(flag, nargs=2, type=float, default=None, metavar=("LO", "HI"))
            elif f.name == "iters":
                sub.add_argument(flag, type=int, default=None)
            else:
                # annotations are strings under future-import, so the caster
                # comes from each field's default value
                caster = _FIELD_TYPES.get(type(f.default), str)
                sub.add_argument(flag, type=caster, default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        try:
            loaded = read_json(args.config)
        except ValueError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update(loaded)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            data[f.name] = value
    # precedence: flag > DIMSUM_THREADS > config file > default
    env_threads = os.environ.get("DIMSUM_THREADS")
    if getattr(args, "threads", None) is None and env_threads is not None:
        try:
            data["threads"] = int(env_threads)
        except ValueError:
            raise ConfigError(f"DIMSUM_THREADS must be an integer, got {env_threads!r}")
    return RunConfig.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        os.makedirs(cfg.output_dir, exist_ok=True)
        resolved = cfg.to_dict()
        resolved["config_hash"] = cfg.hash()
        write_json(cfg.path("config.resolved.json"), resolved)
        started = time.perf_counter()
        COMMANDS[args.command](cfg)
        _record_runtime(cfg, args.command, time.perf_counter() - started)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
