"""Command-line pipeline: synth -> train-encoders -> build-graphs ->
train -> eval.

Every stage reads one JSON config whose canonical hash is embedded in
all outputs; stages refuse to mix artifacts produced under different
hashes. Exit codes: 0 success, 2 config error, 3 missing artifact,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import baselines, checkpoint, data, graphbuild, mplexgnn, mplexgraph
from .diffcore import AdamW, AdamWHyper, LrSchedule, NumericalError
from .encoders import AutoencoderSpec, EncoderStack, TrainConfig, train_stack
from .metrics import delong_test, per_class_report
from .training import FitConfig, fit_classifier, history_csv_rows, predict_proba

log = logging.getLogger("mplexnet")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERICAL = 4

MODEL_NAMES = (
    "mplex",
    "rgcn_multiplex",
    "rgcn_modality",
    "gcn",
    "early",
    "intermediate",
    "late",
)  # plus "no_fusion:<modality>"


class ConfigError(ValueError):
    pass


class MissingArtifactError(FileNotFoundError):
    pass


DEFAULT_CONFIG = {
    "seed": 0,
    "paths": {
        "cohort": "cohort",
        "encoders": "encoders/stack",
        "graphs": "graphs",
        "runs": "runs",
    },
    "synth": {
        "n_patients": 600,
        "noise_scale": 0.1,
        "modality_dims": {
            "CT": 128,
            "Genomic": 64,
            "Demographic": 8,
            "Clinical": 128,
            "Regimen": 64,
            "Continuous": 4,
        },
        "n_factors": 8,
        "class_priors": [0.25, 0.10, 0.30, 0.25, 0.10],
    },
    "reduced_dims": {
        "CT": 16,
        "Genomic": 16,
        "Demographic": 4,
        "Clinical": 16,
        "Regimen": 16,
        "Continuous": 2,
    },
    "cae_concepts": 8,
    "sparsity": {"fraction": 0.01, "min_nodes": 2},
    "graph_mode": "per_patient",
    "gnn": {
        "num_layers": 2,
        "hidden_width": 1,
        "gin_epsilon": 0.0,
        "readout_hidden": [100, 20],
        "num_classes": 5,
        "activation_slope": 0.01,
        "readout": "flatten",
        "binary_walk": False,
    },
    "train": {
        "epochs": 40,
        "base_lr": 0.001,
        "decay_factor": 0.1,
        "decay_every": 20,
        "weight_decay": 0.001,
        "batch_size": 32,
    },
    "encoder_train": {"epochs": 40, "base_lr": 0.001},
    "split": {"train": 0.70, "val": 0.10, "test": 0.20, "n_repeats": 10},
}


def load_config(path=None, seed=None):
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                user = json.load(f)
        except FileNotFoundError as exc:
            raise MissingArtifactError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        _deep_update(cfg, user)
    if seed is not None:
        cfg["seed"] = seed
    _validate_config(cfg)
    return cfg


def _deep_update(base, new):
    for k, v in new.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v


def _validate_config(cfg):
    s = cfg["split"]
    if abs(s["train"] + s["val"] + s["test"] - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    if min(s["train"], s["val"], s["test"]) <= 0:
        raise ConfigError("split fractions must be positive")
    if not (0.0 < cfg["sparsity"]["fraction"] <= 1.0):
        raise ConfigError("sparsity fraction must be in (0, 1]")
    if abs(sum(cfg["synth"]["class_priors"]) - 1.0) > 1e-9:
        raise ConfigError("class priors must sum to 1")
    for m, rd in cfg["reduced_dims"].items():
        native = cfg["synth"]["modality_dims"].get(m)
        if native is not None and rd >= native:
            raise ConfigError(f"reduced dim {rd} for {m} must be < native {native}")
    if cfg["graph_mode"] not in ("per_patient", "global"):
        raise ConfigError(f"unknown graph_mode {cfg['graph_mode']!r}")


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _check_hash(path, expected):
    """First line of a hashed text artifact must carry the config hash."""
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if first != f"# config_hash: {expected}":
        raise ConfigError(
            f"artifact {path} was produced under a different config "
            f"(found {first!r}, expected hash {expected})"
        )


def _write_hashed(path, lines, h):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# config_hash: {h}\n")
        f.write("\n".join(lines) + "\n")


def _schedule(tcfg):
    return LrSchedule(
        base_lr=tcfg["base_lr"],
        decay_factor=tcfg.get("decay_factor", 0.1),
        decay_every=tcfg.get("decay_every", 20),
    )


def _fit_config(cfg, seed_offset=0):
    t = cfg["train"]
    return FitConfig(
        epochs=t["epochs"],
        schedule=_schedule(t),
        weight_decay=t["weight_decay"],
        batch_size=t["batch_size"],
        seed=cfg["seed"] + seed_offset,
    )


def _split_spec(cfg):
    s = cfg["split"]
    return data.SplitSpec(
        train_fraction=s["train"],
        val_fraction=s["val"],
        test_fraction=s["test"],
        seed=cfg["seed"],
        n_repeats=s["n_repeats"],
    )


# ---------------------------------------------------------------------------
# stages


def cmd_synth(cfg, out=None):
    h = config_hash(cfg)
    sy = cfg["synth"]
    spec = data.SynthSpec(
        n_patients=sy["n_patients"],
        modality_dims=dict(sy["modality_dims"]),
        n_factors=sy["n_factors"],
        noise_scale=sy["noise_scale"],
        class_priors=tuple(sy["class_priors"]),
    )
    records, meta = data.synth_generate(spec, seed=cfg["seed"])
    out = out or cfg["paths"]["cohort"]
    data.save_cohort(records, out, config_hash=h)
    meta["config_hash"] = h
    with open(os.path.join(out, "cohort_meta.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
        f.write("\n")
    log.info("wrote %d-patient cohort to %s", len(records), out)
    return out


def _load_cohort(cfg):
    path = cfg["paths"]["cohort"]
    if not os.path.isdir(path):
        raise MissingArtifactError(f"cohort directory not found: {path}")
    _check_hash(os.path.join(path, "labels.csv"), config_hash(cfg))
    return data.load_cohort(path)


def _prepared_records(cfg, split):
    """Imputed records for one split repetition."""
    records = _load_cohort(cfg)
    train_ids, val_ids, test_ids = split
    records = data.impute_mean(records, train_ids)
    by_id = data.records_by_id(records)
    return (
        [by_id[i] for i in train_ids],
        [by_id[i] for i in val_ids],
        [by_id[i] for i in test_ids],
    )


def cmd_train_encoders(cfg, split_rep=0, out=None):
    h = config_hash(cfg)
    records = _load_cohort(cfg)
    splits = data.make_splits(records, _split_spec(cfg))
    train_ids = splits[split_rep][0]
    records = data.impute_mean(records, train_ids)
    by_id = data.records_by_id(records)
    train_records = [by_id[i] for i in train_ids]
    modality_order = list(cfg["reduced_dims"].keys())
    features = {
        m: data.feature_matrix(train_records, m) for m in modality_order
    }
    specs = {
        m: AutoencoderSpec(features[m].shape[1], cfg["reduced_dims"][m])
        for m in modality_order
    }
    et = cfg["encoder_train"]
    tcfg = TrainConfig(
        epochs=et.get("epochs", 40),
        schedule=_schedule({**cfg["train"], **et}),
        weight_decay=cfg["train"]["weight_decay"],
        batch_size=cfg["train"]["batch_size"],
        seed=cfg["seed"],
    )
    stack = train_stack(features, specs, cfg["cae_concepts"], tcfg)
    out = out or cfg["paths"]["encoders"]
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    stack.save(out, extra={"config_hash": h, "split_rep": split_rep})
    log.info("encoder stack saved to %s (P=%d, K=%d)", out,
             stack.concat_width, stack.num_concepts)
    return out


def _load_stack(cfg):
    path = cfg["paths"]["encoders"]
    if not os.path.exists(path + ".json"):
        raise MissingArtifactError(
            f"encoder checkpoint not found: {path}.json (run train-encoders first)"
        )
    _, meta = checkpoint.load_checkpoint(path)
    if meta.get("config_hash") != config_hash(cfg):
        raise ConfigError(
            f"encoder checkpoint {path} was trained under config hash "
            f"{meta.get('config_hash')}, expected {config_hash(cfg)}"
        )
    return EncoderStack.load(path)


def cmd_build_graphs(cfg, split_rep=0, jobs=1, out=None):
    h = config_hash(cfg)
    stack = _load_stack(cfg)
    records = _load_cohort(cfg)
    splits = data.make_splits(records, _split_spec(cfg))
    records = data.impute_mean(records, splits[split_rep][0])
    rule = graphbuild.SparsityRule(**cfg["sparsity"])
    xs = stack.reduce({m: data.feature_matrix(records, m)
                       for m in stack.modality_order})
    out = out or cfg["paths"]["graphs"]
    os.makedirs(out, exist_ok=True)
    if cfg["graph_mode"] == "global":
        train_set = set(splits[split_rep][0])
        train_rows = xs[[i for i, r in enumerate(records)
                         if r.patient_id in train_set]]
        shared = graphbuild.build_mean_multiplex(stack, train_rows, rule)
        graphs = [shared] * len(records)
    else:
        def build(i):
            return graphbuild.build_patient_multiplex(stack, xs[i], rule)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                graphs = list(pool.map(build, range(len(records))))
        else:
            graphs = [build(i) for i in range(len(records))]
    plane_sizes = {}
    for r, g in zip(records, graphs):
        path = os.path.join(out, f"{r.patient_id}.graph")
        lines = [f"{g.P} {g.K}"]
        lines.extend(f"{k} {m} {n}" for k, m, n in g.edge_list())
        _write_hashed(path, lines, h)
        plane_sizes[r.patient_id] = [
            int((np.asarray(a.sum(axis=1)).reshape(-1) > 0).sum()) for a in g.planes
        ]
    summary = {
        "config_hash": h,
        "num_patients": len(records),
        "P": graphs[0].P,
        "K": graphs[0].K,
        "plane_nodes": rule.count(graphs[0].P),
        "plane_edges": rule.count(graphs[0].P) * (rule.count(graphs[0].P) - 1) // 2,
        "plane_sizes": plane_sizes,
    }
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")
    log.info("built %d graphs (P=%d, K=%d) in %s", len(records),
             graphs[0].P, graphs[0].K, out)
    return out


def _load_patient_graph(cfg, patient_id):
    path = os.path.join(cfg["paths"]["graphs"], f"{patient_id}.graph")
    if not os.path.exists(path):
        raise MissingArtifactError(
            f"graph file not found: {path} (run build-graphs first)"
        )
    _check_hash(path, config_hash(cfg))
    return mplexgraph.load_graph(path)


def _graph_samples(cfg, stack, records, binary_walk=False):
    xs = stack.reduce({m: data.feature_matrix(records, m)
                       for m in stack.modality_order})
    samples = []
    cache = {}
    for i, r in enumerate(records):
        g = _load_patient_graph(cfg, r.patient_id)
        key = tuple(g.edge_list()) if cfg["graph_mode"] == "global" else None
        if key is not None and key in cache:
            walk_i, walk_ii = cache[key]
            samples.append(mplexgnn.GraphSample(xs[i], walk_i, walk_ii,
                                                r.label, r.patient_id))
            continue
        s = mplexgnn.prepare_sample(g, xs[i], r.label, r.patient_id,
                                    binary_walk=binary_walk)
        if key is not None:
            cache[key] = (s.walk_i, s.walk_ii)
        samples.append(s)
    return samples


def _vector_samples(records, matrix):
    return [
        baselines.VectorSample(matrix[i], r.label, r.patient_id)
        for i, r in enumerate(records)
    ]


def _plane_samples(records, matrix, planes_per_record):
    return [
        baselines.PlaneSample(matrix[i], planes_per_record[i], r.label, r.patient_id)
        for i, r in enumerate(records)
    ]


def _normalized_raw(records_splits, modality=None):
    """Normalize raw features with train statistics; optionally one modality."""
    from .encoders import NormStats

    train, val, test = records_splits
    modalities = [modality] if modality else list(train[0].features.keys())
    out = []
    stats = {}
    for m in modalities:
        stats[m] = NormStats.fit(data.feature_matrix(train, m))
    for part in (train, val, test):
        blocks = [stats[m].apply(data.feature_matrix(part, m)) for m in modalities]
        out.append(np.concatenate(blocks, axis=1))
    return out


def cmd_train(cfg, model, split_rep=0, out=None, resume=False):
    h = config_hash(cfg)
    modality = None
    if model.startswith("no_fusion:"):
        model, modality = "no_fusion", model.split(":", 1)[1]
    if model not in MODEL_NAMES + ("no_fusion",):
        raise ConfigError(
            f"unknown model {model!r}; valid: "
            + ", ".join(MODEL_NAMES + ("no_fusion:<modality>",))
        )
    records = _load_cohort(cfg)
    splits = data.make_splits(records, _split_spec(cfg))
    if not (0 <= split_rep < len(splits)):
        raise ConfigError(f"split_rep {split_rep} outside 0..{len(splits) - 1}")
    split = splits[split_rep]
    train_r, val_r, test_r = _prepared_records(cfg, split)
    fit_cfg = _fit_config(cfg, seed_offset=split_rep)
    num_classes = cfg["gnn"]["num_classes"]
    slope = cfg["gnn"]["activation_slope"]
    seed = cfg["seed"] + split_rep

    if model == "late":
        return _run_late_fusion(cfg, model, split_rep, train_r, val_r, test_r,
                                fit_cfg, out)

    if model == "mplex":
        stack = _load_stack(cfg)
        sets = [
            _graph_samples(cfg, stack, part, binary_walk=cfg["gnn"]["binary_walk"])
            for part in (train_r, val_r, test_r)
        ]
        gnn_cfg = mplexgnn.MplexGnnConfig(
            num_layers=cfg["gnn"]["num_layers"],
            hidden_width=cfg["gnn"]["hidden_width"],
            gin_epsilon=cfg["gnn"]["gin_epsilon"],
            readout_hidden=tuple(cfg["gnn"]["readout_hidden"]),
            num_classes=num_classes,
            activation_slope=slope,
            readout=cfg["gnn"]["readout"],
            binary_walk=cfg["gnn"]["binary_walk"],
        )
        net = mplexgnn.MplexGNN(stack.concat_width, stack.num_concepts,
                                gnn_cfg, seed=seed)
    elif model in ("rgcn_multiplex", "rgcn_modality", "gcn"):
        stack = _load_stack(cfg)
        mats = [
            stack.reduce({m: data.feature_matrix(part, m)
                          for m in stack.modality_order})
            for part in (train_r, val_r, test_r)
        ]
        p = stack.concat_width
        if model == "rgcn_multiplex":
            sets = []
            for part, mat in zip((train_r, val_r, test_r), mats):
                planes_list = []
                for r in part:
                    g = _load_patient_graph(cfg, r.patient_id)
                    planes_list.append(
                        [baselines.normalized_adjacency(a) for a in g.planes]
                    )
                sets.append(_plane_samples(part, mat, planes_list))
            k = stack.num_concepts
            net = baselines.RelationalGcn(p, k, num_classes=num_classes,
                                          slope=slope, seed=seed)
        elif model == "rgcn_modality":
            widths = [stack.daes[m].spec.bottleneck_dim
                      for m in stack.modality_order]
            planes = baselines.modality_plane_adjacencies(widths)
            sets = [
                _plane_samples(part, mat, [planes] * len(part))
                for part, mat in zip((train_r, val_r, test_r), mats)
            ]
            net = baselines.RelationalGcn(p, len(widths), num_classes=num_classes,
                                          slope=slope, seed=seed)
        else:
            plane = [baselines.complete_graph_normalized(p)]
            sets = [
                _plane_samples(part, mat, [plane] * len(part))
                for part, mat in zip((train_r, val_r, test_r), mats)
            ]
            net = baselines.GcnMonoplex(p, num_classes=num_classes,
                                        slope=slope, seed=seed)
    elif model == "intermediate":
        stack = _load_stack(cfg)
        mats = [
            stack.reduce({m: data.feature_matrix(part, m)
                          for m in stack.modality_order})
            for part in (train_r, val_r, test_r)
        ]
        sets = [_vector_samples(part, mat)
                for part, mat in zip((train_r, val_r, test_r), mats)]
        net = baselines.MlpClassifier(mats[0].shape[1],
                                      baselines.INTERMEDIATE_HIDDEN,
                                      num_classes, slope, seed=seed)
    else:  # no_fusion / early
        if model == "no_fusion":
            if modality not in train_r[0].features:
                raise ConfigError(
                    f"unknown modality {modality!r}; valid: "
                    + ", ".join(sorted(train_r[0].features))
                )
            mats = _normalized_raw((train_r, val_r, test_r), modality)
        else:
            mats = _normalized_raw((train_r, val_r, test_r))
        sets = [_vector_samples(part, mat)
                for part, mat in zip((train_r, val_r, test_r), mats)]
        net = baselines.MlpClassifier(mats[0].shape[1],
                                      baselines.NO_FUSION_HIDDEN,
                                      num_classes, slope, seed=seed)

    name = model if modality is None else f"no_fusion_{modality}"
    run_dir = out or os.path.join(cfg["paths"]["runs"], f"{name}_rep{split_rep}")
    os.makedirs(run_dir, exist_ok=True)
    ckpt_path = os.path.join(run_dir, "checkpoint")
    optimizer = AdamW(net.parameters(),
                      AdamWHyper(weight_decay=fit_cfg.weight_decay))
    start_epoch = 0
    if resume:
        if not os.path.exists(ckpt_path + ".json"):
            raise MissingArtifactError(f"no checkpoint to resume at {ckpt_path}.json")
        arrays, meta = checkpoint.load_checkpoint(ckpt_path)
        if meta.get("config_hash") != h:
            raise ConfigError("resume checkpoint has a different config hash")
        start_epoch = meta["next_epoch"]
        optimizer.state.step_count = meta["step_count"]
        for pname, p in net.parameters().items():
            p.data = arrays[f"param.{pname}"].reshape(p.data.shape)
            optimizer.state.m[pname] = arrays[f"m.{pname}"].reshape(p.data.shape)
            optimizer.state.v[pname] = arrays[f"v.{pname}"].reshape(p.data.shape)

    result = fit_classifier(net, sets[0], sets[1], fit_cfg,
                            start_epoch=start_epoch, optimizer=optimizer)

    # last-state checkpoint (for resume) and best-state arrays side by side
    arrays = {}
    params = net.parameters()
    for pname, p in params.items():
        arrays[f"param.{pname}"] = result.final_state[pname]
        arrays[f"best.{pname}"] = p.data
        arrays[f"m.{pname}"] = optimizer.state.m[pname]
        arrays[f"v.{pname}"] = optimizer.state.v[pname]
    checkpoint.save_checkpoint(
        ckpt_path,
        arrays,
        extra={
            "config_hash": h,
            "model": name,
            "split_rep": split_rep,
            "next_epoch": fit_cfg.epochs,
            "step_count": optimizer.state.step_count,
            "best_epoch": result.best_epoch,
            "best_val_wauc": result.best_val_wauc,
        },
    )
    _write_hashed(os.path.join(run_dir, "history.csv"),
                  list(history_csv_rows(result.history)), h)
    for part_name, part_samples, part_records in (
        ("val", sets[1], val_r),
        ("test", sets[2], test_r),
    ):
        probs = predict_proba(net, part_samples)
        ids = [r.patient_id for r in part_records]
        _write_hashed(os.path.join(run_dir, f"scores_{part_name}.csv"),
                      list(baselines.scores_csv_rows(ids, probs)), h)
    log.info("trained %s (rep %d): best val wauc %.4f at epoch %d",
             name, split_rep, result.best_val_wauc, result.best_epoch)
    return run_dir


def _run_late_fusion(cfg, model, split_rep, train_r, val_r, test_r, fit_cfg, out):
    """Average the per-modality no-fusion probabilities (labeled simplification)."""
    h = config_hash(cfg)
    run_dir = out or os.path.join(cfg["paths"]["runs"], f"late_rep{split_rep}")
    os.makedirs(run_dir, exist_ok=True)
    modalities = sorted(train_r[0].features)
    val_sets, test_sets = [], []
    for idx, m in enumerate(modalities):
        mats = _normalized_raw((train_r, val_r, test_r), m)
        sets = [_vector_samples(part, mat)
                for part, mat in zip((train_r, val_r, test_r), mats)]
        net = baselines.MlpClassifier(
            mats[0].shape[1], baselines.NO_FUSION_HIDDEN,
            cfg["gnn"]["num_classes"], cfg["gnn"]["activation_slope"],
            seed=cfg["seed"] + split_rep + 1000 * idx,
        )
        fit_classifier(net, sets[0], sets[1], fit_cfg)
        val_sets.append(predict_proba(net, sets[1]))
        test_sets.append(predict_proba(net, sets[2]))
    for part_name, score_sets, part_records in (
        ("val", val_sets, val_r),
        ("test", test_sets, test_r),
    ):
        fused = baselines.run_late_fusion_avg(score_sets)
        ids = [r.patient_id for r in part_records]
        _write_hashed(os.path.join(run_dir, f"scores_{part_name}.csv"),
                      list(baselines.scores_csv_rows(ids, fused)), h)
    note = ["late fusion = unweighted probability averaging",
            "(simplification of the uncertainty-weighted original)"]
    _write_hashed(os.path.join(run_dir, "METHOD.txt"), note, h)
    log.info("late fusion scores written to %s", run_dir)
    return run_dir


def cmd_eval(cfg, score_csvs, out=None, reference=None):
    """Score CSVs against the cohort labels; DeLong versus ``reference``."""
    h = config_hash(cfg)
    records = data.records_by_id(_load_cohort(cfg))
    loaded = {}
    for path in score_csvs:
        if not os.path.exists(path):
            raise MissingArtifactError(f"scores file not found: {path}")
        _check_hash(path, h)
        name = os.path.basename(os.path.dirname(path)) or os.path.basename(path)
        loaded[name] = baselines.load_scores_csv(path)
    id_sets = {name: tuple(ids) for name, (ids, _) in loaded.items()}
    if len(set(id_sets.values())) != 1:
        raise ConfigError(f"score files disagree on patient ids: {sorted(id_sets)}")
    ids = next(iter(id_sets.values()))
    labels = np.array([records[i].label for i in ids])
    reference = reference or next(iter(loaded))
    ref_scores = loaded[reference][1]
    rows = ["model,class,auc,count,delong_p_vs_" + reference]
    table = []
    for name, (_, probs) in loaded.items():
        rep = per_class_report(probs, labels)
        pvals = {}
        for cls in range(probs.shape[1]):
            binary = (labels == cls).astype(int)
            if 0 < binary.sum() < len(binary):
                _, _, p = delong_test(probs[:, cls], ref_scores[:, cls], binary)
                pvals[cls] = p
        for cls, auc in enumerate(rep.per_class_auc):
            p = pvals.get(cls, float("nan"))
            rows.append(f"{name},{cls},{auc!r},{rep.class_counts[cls]},{p!r}")
        rows.append(f"{name},weighted,{rep.weighted_auc!r},"
                    f"{sum(rep.class_counts)},")
        table.append((name, rep, pvals))
    out = out or os.path.join(cfg["paths"]["runs"], "eval")
    os.makedirs(out, exist_ok=True)
    _write_hashed(os.path.join(out, "report.csv"), rows, h)
    sig = ["model,class,p_value,significant(p<0.01)"]
    for name, rep, pvals in table:
        for cls, p in sorted(pvals.items()):
            sig.append(f"{name},{cls},{p!r},{'yes' if p < 0.01 else 'no'}")
    _write_hashed(os.path.join(out, "significance.csv"), sig, h)
    txt = [f"reference model: {reference}",
           "class frequencies: "
           + " ".join(f"{c}:{n}" for c, n in enumerate(table[0][1].class_counts))]
    for name, rep, _ in table:
        per = " ".join(
            "nan" if np.isnan(a) else f"{a:.4f}" for a in rep.per_class_auc
        )
        txt.append(f"{name}: per-class [{per}] weighted {rep.weighted_auc:.4f}")
    _write_hashed(os.path.join(out, "report.txt"), txt, h)
    log.info("evaluation report written to %s", out)
    return out


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mplexnet",
        description="Multiplexed-graph multimodal fusion pipeline",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for per-patient work")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth").add_argument("--out")
    p = sub.add_parser("train-encoders")
    p.add_argument("--split-rep", type=int, default=0)
    p.add_argument("--out")
    p = sub.add_parser("build-graphs")
    p.add_argument("--split-rep", type=int, default=0)
    p.add_argument("--out")
    p = sub.add_parser("train")
    p.add_argument("--model", required=True)
    p.add_argument("--split-rep", type=int, default=0)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--out")
    p = sub.add_parser("eval")
    p.add_argument("scores", nargs="+", help="score CSV files")
    p.add_argument("--reference", help="model name for DeLong comparisons")
    p.add_argument("--out")
    sub.add_parser("show-config")
    return parser


def main(argv=None):
    level = os.environ.get("MPLEXNET_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
        if args.command == "show-config":
            print(json.dumps(cfg, indent=1, sort_keys=True))
            print(f"# hash: {config_hash(cfg)}")
        elif args.command == "synth":
            cmd_synth(cfg, out=args.out)
        elif args.command == "train-encoders":
            cmd_train_encoders(cfg, split_rep=args.split_rep, out=args.out)
        elif args.command == "build-graphs":
            cmd_build_graphs(cfg, split_rep=args.split_rep, jobs=args.jobs,
                             out=args.out)
        elif args.command == "train":
            cmd_train(cfg, args.model, split_rep=args.split_rep,
                      out=args.out, resume=args.resume)
        elif args.command == "eval":
            cmd_eval(cfg, args.scores, out=args.out, reference=args.reference)
    except (ConfigError, data.CohortFormatError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (MissingArtifactError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_MISSING
    except (NumericalError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
