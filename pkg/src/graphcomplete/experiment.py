"""Experiment driver: configuration, masking sweeps, seeds, artifacts.

A run is a grid of (missing-rate pair, seed) cells.  Each cell masks the
dataset, trains the reconstruction pipeline and/or the zero-fill baseline,
and reports split accuracies.  Cells are independent jobs; a bounded worker
pool may execute them concurrently, but a single collector writes all files
in submission order, so outputs are byte-identical across reruns.

Configuration is a flat key=value text file; command-line flags mirror the
keys and override the file.  Every output file embeds the config digest and
the seed it came from.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .data import GraphDataset, MaskSpec, load_dataset, make_splits, apply_mask
from .downstream import (
    DownstreamConfig,
    ReconTrainConfig,
    run_reconstruction,
    train_downstream,
    train_gcn_baseline,
)
from .fusion import attention_fuse, export_fusion_weights
from .nn import OptimConfig
from .objective import ContrastiveConfig
from .structure_path import PPRConfig, dump_structure

RECON_METHOD = "recon-gcn"
BASELINE_METHOD = "zerofill-gcn"


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment settings; field names double as config-file keys."""

    dataset: str = ""
    out: str = "runs"
    feature_missing: tuple = (0.3,)
    edge_missing: tuple = (0.3,)
    feature_mode: str = "entry"
    seeds: tuple = (0,)
    baseline: str = "with"          # with | only | off
    alpha: float = 0.1
    k: int = 20
    ppr_method: str = "closed_form"
    ppr_tol: float = 1e-8
    ppr_max_iter: int = 1000
    temperature: float = 0.5
    imputer_hidden: int = 256
    pe_hidden: int = 512
    ppnp_hidden: int = 256
    gcn_hidden: int = 64
    attention_dim: int = 64
    epochs: int = 200               # reconstruction epochs
    recon_lr: float = 0.01
    recon_weight_decay: float = 0.0
    recon_optimizer: str = "adam"
    recon_dropout: float = 0.0
    down_lr: float = 0.01
    down_weight_decay: float = 5e-4
    down_optimizer: str = "adam"
    down_dropout: float = 0.5
    down_max_epochs: int = 500
    down_patience: int = 100
    dump_embeddings: bool = False
    dump_structure: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.dataset:
            raise ValueError("dataset path is required")
        for rate in tuple(self.feature_missing) + tuple(self.edge_missing):
            if not (0.0 <= rate <= 1.0):
                raise ValueError(f"missing rate {rate} outside [0, 1]")
        nf, ne = len(self.feature_missing), len(self.edge_missing)
        if nf != ne and 1 not in (nf, ne):
            raise ValueError(f"cannot pair {nf} feature rates with {ne} edge rates")
        if self.baseline not in ("with", "only", "off"):
            raise ValueError(f"baseline must be with/only/off, got {self.baseline!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.epochs < 0 or self.workers < 1:
            raise ValueError("epochs must be >= 0 and workers >= 1")
        # constructing the sub-configs validates their own ranges
        self.recon_config()
        self.downstream_config()

    def rate_pairs(self) -> list[tuple[float, float]]:
        fr, er = tuple(self.feature_missing), tuple(self.edge_missing)
        if len(fr) == 1 and len(er) > 1:
            fr = fr * len(er)
        if len(er) == 1 and len(fr) > 1:
            er = er * len(fr)
        return list(zip(fr, er))

    def methods(self) -> list[str]:
        if self.baseline == "only":
            return [BASELINE_METHOD]
        if self.baseline == "off":
            return [RECON_METHOD]
        return [RECON_METHOD, BASELINE_METHOD]

    def recon_config(self) -> ReconTrainConfig:
        return ReconTrainConfig(
            ppr=PPRConfig(alpha=self.alpha, k=self.k, method=self.ppr_method,
                          tol=self.ppr_tol, max_iter=self.ppr_max_iter),
            contrastive=ContrastiveConfig(temperature=self.temperature),
            optim=OptimConfig(learning_rate=self.recon_lr,
                              weight_decay=self.recon_weight_decay,
                              method=self.recon_optimizer),
            imputer_hidden=self.imputer_hidden,
            pe_hidden=self.pe_hidden,
            ppnp_hidden=self.ppnp_hidden,
            dropout=self.recon_dropout,
            epochs=self.epochs,
        )

    def downstream_config(self) -> DownstreamConfig:
        return DownstreamConfig(
            optim=OptimConfig(learning_rate=self.down_lr,
                              weight_decay=self.down_weight_decay,
                              method=self.down_optimizer),
            gcn_hidden=self.gcn_hidden,
            attention_dim=self.attention_dim,
            dropout=self.down_dropout,
            max_epochs=self.down_max_epochs,
            patience=self.down_patience,
        )

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# config file and overrides

_TUPLE_FLOAT = ("feature_missing", "edge_missing")
_TUPLE_INT = ("seeds",)
_BOOL = ("dump_embeddings", "dump_structure")


def _coerce(name: str, raw):
    if not isinstance(raw, str):
        return raw
    if name in _TUPLE_FLOAT:
        return tuple(float(x) for x in raw.split(",") if x != "")
    if name in _TUPLE_INT:
        return tuple(int(x) for x in raw.split(",") if x != "")
    if name in _BOOL:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if name not in ExperimentConfig.__dataclass_fields__:
        raise ValueError(f"unknown config key {name!r}")
    default = ExperimentConfig.__dataclass_fields__[name].default
    if isinstance(default, int) and not isinstance(default, bool):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_file(path: str) -> dict:
    """Flat key=value lines; # starts a comment; keys must be config fields."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value)
    return out


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    merged = {}
    for source in (file_values or {}), (overrides or {}):
        for k, v in source.items():
            if v is not None:
                merged[k] = _coerce(k, v)
    return ExperimentConfig(**merged)


# ---------------------------------------------------------------------------
# artifact writers


def export_embeddings(matrix: np.ndarray, path: str, header: str | None = None) -> None:
    """tsv of node id plus the row's values, 12 significant digits."""
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for i in range(matrix.shape[0]):
            vals = "\t".join(format(v, ".12g") for v in matrix[i])
            fh.write(f"{i}\t{vals}\n")


def read_embeddings(path: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            rows.append([float(v) for v in parts[1:]])
    return np.asarray(rows, dtype=np.float64)


def _write_loss_csv(path: str, header: str, columns: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n{columns}\n")
        for row in rows:
            fh.write(",".join(format(v, ".10g") for v in row) + "\n")


# ---------------------------------------------------------------------------
# the sweep


def _run_cell(ds: GraphDataset, cfg: ExperimentConfig, fr: float, er: float, seed: int):
    masked = apply_mask(ds, MaskSpec(feature_missing_rate=fr, edge_missing_rate=er,
                                     feature_mode=cfg.feature_mode, seed=seed))
    splits = make_splits(masked, seed=seed)
    digest = cfg.digest()
    results = {}
    recon = None
    if RECON_METHOD in cfg.methods():
        recon = run_reconstruction(masked, cfg.recon_config(), seed)
        results[RECON_METHOD] = train_downstream(
            recon, masked.labels, masked.num_classes, splits,
            cfg.downstream_config(), seed, digest)
    if BASELINE_METHOD in cfg.methods():
        results[BASELINE_METHOD] = train_gcn_baseline(
            masked, splits, cfg.downstream_config(), seed, digest)
    return recon, results


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute the sweep and write runs.csv, loss curves, summary.json.

    Returns {"paths": ..., "summary": nested mean/sd dict} for callers that
    want the numbers without re-reading the files.
    """
    ds = load_dataset(cfg.dataset)
    digest = cfg.digest()
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    losses_dir = os.path.join(out, "losses")
    os.makedirs(losses_dir, exist_ok=True)
    if cfg.dump_embeddings:
        os.makedirs(os.path.join(out, "embeddings"), exist_ok=True)
    if cfg.dump_structure:
        os.makedirs(os.path.join(out, "structure"), exist_ok=True)

    cells = [(fr, er, seed) for fr, er in cfg.rate_pairs() for seed in cfg.seeds]
    accs: dict[tuple, list] = {}
    runs_path = os.path.join(out, "runs.csv")

    with open(runs_path, "w", encoding="utf-8") as runs:
        runs.write(f"# config={digest}\n")
        runs.write("feature_missing,edge_missing,seed,method,"
                   "test_accuracy,val_accuracy,train_accuracy,best_epoch\n")
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [(cell, pool.submit(_run_cell, ds, cfg, *cell)) for cell in cells]
            for (fr, er, seed), fut in futures:
                try:
                    recon, results = fut.result()
                except Exception as exc:
                    raise RuntimeError(
                        f"cell feature_missing={fr} edge_missing={er} seed={seed} failed: {exc}"
                    ) from exc
                tag = f"fr{fr:g}_er{er:g}_seed{seed}"
                head = f"config={digest} seed={seed} feature_missing={fr:g} edge_missing={er:g}"
                if recon is not None:
                    _write_loss_csv(
                        os.path.join(losses_dir, f"recon_{tag}.csv"), head,
                        "epoch,feature_term,structure_term,total",
                        [(e, *row) for e, row in enumerate(recon.loss_history)])
                for method, res in results.items():
                    m = res.metrics
                    runs.write(f"{fr:g},{er:g},{seed},{method},"
                               f"{m.test_accuracy:.10g},{m.val_accuracy:.10g},"
                               f"{m.train_accuracy:.10g},{m.best_epoch}\n")
                    runs.flush()
                    accs.setdefault((fr, er, method), []).append(m.test_accuracy)
                    _write_loss_csv(
                        os.path.join(losses_dir, f"downstream_{tag}_{method}.csv"),
                        f"{head} method={method}", "epoch,loss",
                        list(enumerate(res.metrics.loss_curve)))
                if recon is not None and cfg.dump_embeddings:
                    cell_dir = os.path.join(out, "embeddings", tag)
                    os.makedirs(cell_dir, exist_ok=True)
                    res = results[RECON_METHOD]
                    fusion_out = attention_fuse(recon.imputed, recon.propagated, res.store)
                    export_embeddings(fusion_out.fused.value,
                                      os.path.join(cell_dir, "fused.tsv"),
                                      f"{head} view=fused")
                    export_embeddings(recon.imputed,
                                      os.path.join(cell_dir, "imputed.tsv"),
                                      f"{head} view=imputed")
                    export_embeddings(recon.propagated,
                                      os.path.join(cell_dir, "propagated.tsv"),
                                      f"{head} view=propagated")
                    export_fusion_weights(fusion_out,
                                          os.path.join(cell_dir, "fusion_weights.tsv"),
                                          f"{head} view=weights")
                if recon is not None and cfg.dump_structure:
                    dump_structure(recon.diffusion_topk,
                                   os.path.join(out, "structure", f"{tag}.tsv"),
                                   head)

    summary = {"digest": digest, "config": _jsonable_config(cfg), "results": {}}
    for (fr, er, method), values in accs.items():
        key = f"feature_missing={fr:g},edge_missing={er:g}"
        arr = np.asarray(values)
        summary["results"].setdefault(method, {})[key] = {
            "mean": float(arr.mean()),
            "sd": float(arr.std()),
            "n": int(arr.size),
            "test_accuracies": [float(v) for v in values],
        }
    summary_path = os.path.join(out, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"paths": {"runs": runs_path, "summary": summary_path, "out": out},
            "summary": summary}


def _jsonable_config(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


# ---------------------------------------------------------------------------
# command line


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="graphcomplete",
        description="Reconstruct missing node features and edges, then "
                    "classify nodes; sweeps missing rates over seeds.")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--feature-missing", dest="feature_missing",
                   help="comma list of feature missing rates")
    p.add_argument("--edge-missing", dest="edge_missing",
                   help="comma list of edge missing rates")
    p.add_argument("--feature-mode", dest="feature_mode", choices=["entry", "row"])
    p.add_argument("--alpha", type=float, help="diffusion reset probability")
    p.add_argument("--k", type=int, help="neighbors kept per diffusion row")
    p.add_argument("--temperature", type=float, help="contrastive temperature")
    p.add_argument("--epochs", type=int, help="reconstruction epochs")
    p.add_argument("--seeds", help="comma list of seeds")
    p.add_argument("--baseline", choices=["with", "only", "off"],
                   help="run the zero-fill baseline alongside, alone, or not at all")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dump-embeddings", dest="dump_embeddings",
                   action="store_true", default=None,
                   help="write per-cell embedding tsv files")
    p.add_argument("--dump-structure", dest="dump_structure",
                   action="store_true", default=None,
                   help="write per-cell sparsified diffusion edge lists")
    p.add_argument("--ppr-method", dest="ppr_method",
                   choices=["closed_form", "power_iteration"])
    p.add_argument("--ppr-tol", dest="ppr_tol", type=float)
    p.add_argument("--ppr-max-iter", dest="ppr_max_iter", type=int)
    p.add_argument("--imputer-hidden", dest="imputer_hidden", type=int)
    p.add_argument("--pe-hidden", dest="pe_hidden", type=int)
    p.add_argument("--ppnp-hidden", dest="ppnp_hidden", type=int)
    p.add_argument("--gcn-hidden", dest="gcn_hidden", type=int)
    p.add_argument("--attention-dim", dest="attention_dim", type=int)
    p.add_argument("--recon-lr", dest="recon_lr", type=float)
    p.add_argument("--recon-weight-decay", dest="recon_weight_decay", type=float)
    p.add_argument("--recon-optimizer", dest="recon_optimizer", choices=["sgd", "adam"])
    p.add_argument("--recon-dropout", dest="recon_dropout", type=float)
    p.add_argument("--down-lr", dest="down_lr", type=float)
    p.add_argument("--down-weight-decay", dest="down_weight_decay", type=float)
    p.add_argument("--down-optimizer", dest="down_optimizer", choices=["sgd", "adam"])
    p.add_argument("--down-dropout", dest="down_dropout", type=float)
    p.add_argument("--down-max-epochs", dest="down_max_epochs", type=int)
    p.add_argument("--down-patience", dest="down_patience", type=int)
    p.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items()
                     if k != "config" and v is not None}
        cfg = make_config(file_values, overrides)
        result = run_experiment(cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for method, per_rate in sorted(result["summary"]["results"].items()):
        for key, stats in sorted(per_rate.items()):
            print(f"{key} {method}: mean={stats['mean']:.4f} "
                  f"sd={stats['sd']:.4f} n={stats['n']}")
    print(f"outputs in {result['paths']['out']} (config {result['summary']['digest']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
