"""Pipeline stages: each reads upstream artifacts and writes a content-addressed directory."""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .artifacts import (
    MissingArtifactError,
    read_tweet_table,
    require_stage,
    sha256_dir,
    sha256_file,
    stage_dir,
    stage_key,
    write_csv,
    write_manifest,
    write_tweet_table,
)
from .causal import prepare_study, run_study, sensitivity_grid
from .classify import dump_model
from .cohort import CONTROL_GROUPS, TREATED, load_policy_table
from .config import write_config
from .corpus import CANNABIS, JUUL, IngestFilters, ingest, load_embeddings, read_blocklist
from .metrics import evaluate_classifier
from .stance import STANCE_NAMES, load_stance_annotations, predict_stance, stance_index, train_stance_model
from .weaklabel import (
    WeakSupervisionClassifier,
    classify_personal,
    fallback_scores,
    label_matrix,
    load_external_scores,
    load_lexicon,
)

logger = logging.getLogger(__name__)

ATE_COLUMNS = ["method", "group", "horizon_N", "ate_mean", "ate_sd", "ci_lo", "ci_hi",
               "n_treated", "n_control", "n_trimmed", "n_sims", "flag"]


def _digest(path):
    return None if path is None else sha256_file(path)


# --- keys -------------------------------------------------------------------------

def ingest_key(cfg):
    return stage_key("ingest", {
        "corpus": _digest(cfg.path("corpus")),
        "embeddings": _digest(cfg.path("embeddings")),
        "blocklist": None if cfg["study.disable_bot_filter"] else _digest(cfg.path("blocklist")),
        "dim": cfg["estimation.embedding_dim"],
    })


def weaklabel_key(cfg):
    return stage_key("weaklabel", {
        "upstream": ingest_key(cfg),
        "lexicon": _digest(cfg.path("lexicon", required=False)),
        "external_scores": _digest(cfg.path("external_scores", required=False)),
        "config": cfg.section_dict("weaklabel"),
        "thresholds": [cfg["study.juul_threshold"], cfg["study.cannabis_threshold"]],
        "seed": cfg.seed,
    })


def stance_key(cfg):
    return stage_key("stance", {
        "upstream": weaklabel_key(cfg),
        "juul": _digest(cfg.path("stance_juul")),
        "cannabis": _digest(cfg.path("stance_cannabis")),
        "seed": cfg.seed,
    })


def _scored_source(cfg, out_dir):
    """Directory of the scored corpus and its identity for downstream keys."""
    direct = cfg.path("scored_corpus", required=False)
    if direct is not None:
        if not (direct / "tweets.csv").exists():
            raise MissingArtifactError("stance", direct)
        return direct, sha256_dir(direct, ["tweets.csv", "embeddings.npy"])
    key = stance_key(cfg)
    return require_stage(out_dir, "stance", key), key


def _estimate_payload(cfg, source_id):
    policy = cfg.path("policy_table", required=False)
    return {
        "upstream": source_id,
        "policy_table": _digest(policy),
        "config": cfg.section_dict("study", "estimation"),
        "seed": cfg.seed,
    }


def synth_key(cfg):
    return stage_key("synth", {"config": cfg.section_dict("synth", "study"), "seed": cfg.seed})


# --- stages ---------------------------------------------------------------------

def _ensure_dir(out):
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(cfg, out_dir):
    key = ingest_key(cfg)
    out = stage_dir(out_dir, "ingest", key)
    table = load_embeddings(cfg.path("embeddings"), dim=cfg["estimation.embedding_dim"])
    tweets, report = ingest(cfg.path("corpus"), IngestFilters(), table=table)
    removed = 0
    if not cfg["study.disable_bot_filter"]:
        blocked = read_blocklist(cfg.path("blocklist"))
        keep = ~tweets.frame["user_id"].isin(blocked).to_numpy()
        removed = int(tweets.frame.loc[~keep, "user_id"].nunique())
        tweets = tweets.subset(keep)
    write_tweet_table(tweets, out)
    summary = {"read": report.read, "kept": len(tweets), "malformed_lines": report.malformed,
               "dropped": dict(sorted(report.dropped.items())), "bot_users_removed": removed}
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "ingest", key, cfg.seed, {
        "corpus": sha256_file(cfg.path("corpus")), "embeddings": sha256_file(cfg.path("embeddings")),
    })
    return out


def cmd_weaklabel(cfg, out_dir):
    up = require_stage(out_dir, "ingest", ingest_key(cfg))
    key = weaklabel_key(cfg)
    out = stage_dir(out_dir, "weaklabel", key)
    tweets = read_tweet_table(up)
    texts = tweets.frame["text"].tolist()
    lexicon = load_lexicon(cfg.path("lexicon", required=False))
    ext_path = cfg.path("external_scores", required=False)
    if ext_path is not None:
        ext = load_external_scores(ext_path)
        scores = [ext.get(t) for t in tweets.frame["id"]]
        votes = label_matrix(texts, lexicon, scores)
    else:
        votes = label_matrix(texts, lexicon)
        fb = fallback_scores(tweets.X, votes)
        if fb is not None:
            votes = label_matrix(texts, lexicon, fb.tolist())
    model = WeakSupervisionClassifier(
        confidence_threshold=cfg["weaklabel.confidence_threshold"],
        n_samples=cfg["weaklabel.n_samples"], random_state=cfg.seed,
    ).fit(tweets.X, votes)
    thresholds = {JUUL: cfg["study.juul_threshold"], CANNABIS: cfg["study.cannabis_threshold"]}
    p, is_personal, retained = classify_personal(
        model, tweets.X, tweets.frame["dataset"], tweets.frame["user_id"], thresholds
    )
    keep = is_personal & tweets.frame["user_id"].isin(retained).to_numpy()
    frame = tweets.frame.assign(p_personal=p)
    personal = type(tweets)(frame, tweets.X).subset(keep)
    write_tweet_table(personal, out)
    dump_model(model.estimator_, out / "personal_model.json")
    lm = model.label_model_
    summary = {
        "n_tweets": len(tweets), "n_personal": int(is_personal.sum()), "n_kept": int(keep.sum()),
        "n_users_retained": len(retained), "label_model_accuracy": lm.accuracy_.tolist(),
        "label_model_prior": list(map(float, lm.prior_)),
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "weaklabel", key, cfg.seed, {"ingest": up.name})
    return out


def cmd_stance(cfg, out_dir):
    wl = require_stage(out_dir, "weaklabel", weaklabel_key(cfg))
    ing = require_stage(out_dir, "ingest", ingest_key(cfg))
    key = stance_key(cfg)
    out = stage_dir(out_dir, "stance", key)
    personal = read_tweet_table(wl)
    everything = read_tweet_table(ing)
    row_of = pd.Index(everything.frame["id"])
    P = np.zeros((len(personal), 3))
    metrics = {}
    for ds, path_key in ((JUUL, "stance_juul"), (CANNABIS, "stance_cannabis")):
        ann = load_stance_annotations(cfg.path(path_key))
        rows = row_of.get_indexer(ann["tweet_id"])
        if np.any(rows < 0):
            logger.warning("%d %s stance annotations are not in the ingested corpus; skipped",
                           int((rows < 0).sum()), ds)
        ann, rows = ann[rows >= 0], rows[rows >= 0]
        train = (ann["split"] == "train").to_numpy()
        model = train_stance_model(everything.X[rows[train]], ann["label"][train], seed=cfg.seed)
        dump_model(model, _ensure_dir(out) / f"stance_{ds.lower()}.json")
        ev = ~train
        y_ev = np.array([stance_index(v) for v in ann["label"][ev]])
        if ev.any() and len(np.unique(y_ev)) >= 2:
            metrics[ds] = evaluate_classifier(y_ev, predict_stance(everything.X[rows[ev]], model),
                                              classes=np.arange(3))
        mask = (personal.frame["dataset"] == ds).to_numpy()
        if mask.any():
            P[mask] = predict_stance(personal.X[mask], model)
    frame = personal.frame.copy()
    for j, name in enumerate(STANCE_NAMES):
        frame[f"p_{name}"] = P[:, j]
    write_tweet_table(type(personal)(frame, personal.X), out)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "stance", key, cfg.seed, {"weaklabel": wl.name})
    return out


def _policy(cfg):
    return load_policy_table(cfg.path("policy_table", required=False))


def cmd_estimate(cfg, out_dir):
    src, source_id = _scored_source(cfg, out_dir)
    key = stage_key("estimate", _estimate_payload(cfg, source_id))
    out = _ensure_dir(stage_dir(out_dir, "estimate", key))
    settings = cfg.estimation_settings()
    tweets = read_tweet_table(src)
    study = prepare_study(tweets, cfg["study.treatment_state"], cfg.legalization_date, _policy(cfg),
                          include_retweets=cfg["study.include_retweets"])
    res = run_study(study, settings)
    write_csv(res.ate_table()[ATE_COLUMNS], out / "ate.csv")
    write_csv(res.balance_table(), out / "balance.csv")
    write_csv(res.population_table(), out / "population.csv")
    write_csv(res.plot_data(), out / "plot_data.csv")
    write_manifest(out, "estimate", key, cfg.seed, {"scored_corpus": str(source_id)},
                   {"ci_mode": settings.ci_mode, "n_sims": settings.n_sims,
                    "methods": list(settings.methods)})
    return out


def cmd_sensitivity(cfg, out_dir):
    src, source_id = _scored_source(cfg, out_dir)
    key = stage_key("sensitivity", _estimate_payload(cfg, source_id))
    out = _ensure_dir(stage_dir(out_dir, "sensitivity", key))
    settings = cfg.estimation_settings()
    tweets = read_tweet_table(src)
    ates, bals, pops = sensitivity_grid(tweets, cfg["study.treatment_state"], cfg.legalization_date,
                                        _policy(cfg), settings)
    write_csv(ates[ATE_COLUMNS + ["include_retweets"]], out / "ate.csv")
    write_csv(bals, out / "balance.csv")
    write_csv(pops, out / "population.csv")
    write_manifest(out, "sensitivity", key, cfg.seed, {"scored_corpus": str(source_id)},
                   {"ci_mode": settings.ci_mode, "n_sims": settings.n_sims})
    return out


def cmd_report(cfg, out_dir):
    src_id = _scored_source(cfg, out_dir)[1]
    payload = _estimate_payload(cfg, src_id)
    est = require_stage(out_dir, "estimate", stage_key("estimate", payload))
    sens = stage_dir(out_dir, "sensitivity", stage_key("sensitivity", payload))
    key = stage_key("report", {"estimate": est.name, "sensitivity": sens.name if sens.exists() else None})
    out = _ensure_dir(stage_dir(out_dir, "report", key))
    ate = pd.read_csv(est / "ate.csv", keep_default_na=False, na_values={c: [""] for c in ATE_COLUMNS[3:10]})
    write_csv(ate, out / "ate_report.csv")
    write_csv(pd.read_csv(est / "balance.csv"), out / "balance_report.csv")
    write_csv(pd.read_csv(est / "plot_data.csv"), out / "plot_data.csv")
    if (sens / "manifest.json").exists():
        write_csv(pd.read_csv(sens / "ate.csv", keep_default_na=False,
                              na_values={c: [""] for c in ATE_COLUMNS[3:10]}), out / "sensitivity_ate.csv")
        write_csv(pd.read_csv(sens / "balance.csv"), out / "sensitivity_balance.csv")
    digests = sha256_dir(out)
    (out / "digest.json").write_text(json.dumps(digests, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "report", key, cfg.seed, {"estimate": est.name})
    return out


def synth_spec(cfg):
    from .synth import GeneratorSpec

    tiers = list(cfg["synth.tiers"])
    if TREATED not in tiers:
        raise ValueError("synth.tiers must include T")
    controls = [t for t in tiers if t != TREATED]
    taus = cfg["synth.tau"]
    if len(taus) != len(controls) or any(c not in CONTROL_GROUPS for c in controls):
        from .config import ConfigError

        raise ConfigError("synth.tau", f"need one value per control tier {controls}")
    return GeneratorSpec(
        n_users=cfg["synth.n_users"], shares={t: 1.0 / len(tiers) for t in tiers},
        tau=dict(zip(controls, taus)), gamma=cfg["synth.gamma"], dim=cfg["synth.dim"],
        stance_noise=cfg["synth.stance_noise"], treatment_state=cfg["study.treatment_state"],
        legalization_date=cfg.legalization_date, seed=cfg.seed,
    )


def cmd_synth(cfg, out_dir):
    from .synth import generate, write_corpus

    key = synth_key(cfg)
    out = stage_dir(out_dir, "synth", key)
    spec = synth_spec(cfg)
    write_corpus(generate(spec), out)
    values = cfg.section_dict("study", "estimation", "weaklabel", "run")
    values["estimation"]["embedding_dim"] = spec.dim
    values["paths"] = {
        "corpus": "tweets.jsonl", "embeddings": "embeddings.txt", "policy_table": "policy_table.csv",
        "lexicon": "lexicon.csv", "blocklist": "blocklist.txt", "external_scores": "external_scores.csv",
        "stance_juul": "stance_juul.csv", "stance_cannabis": "stance_cannabis.csv",
    }
    write_config(values, out / "config.ini")
    write_manifest(out, "synth", key, cfg.seed, {}, {"spec": cfg.section_dict("synth")["synth"]})
    return out


STAGES = {
    "ingest": cmd_ingest,
    "weaklabel": cmd_weaklabel,
    "stance": cmd_stance,
    "estimate": cmd_estimate,
    "sensitivity": cmd_sensitivity,
    "synth": cmd_synth,
    "report": cmd_report,
}
