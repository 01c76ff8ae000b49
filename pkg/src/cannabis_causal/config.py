"""INI run configuration with typed fields and section-qualified errors."""

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .causal.simulation import CI_MODES, METHODS, NAIVE, EstimationSettings
from .cohort import HORIZONS, LEGALIZATION_DATES


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` is the ``section.key`` path."""

    def __init__(self, field_path, message):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


def _int_tuple(text):
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _str_tuple(text):
    return tuple(v for v in str(text).replace(",", " ").split())


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_str(text):
    text = str(text).strip()
    return text or None


# section -> key -> (parser, default)
SCHEMA = {
    "paths": {
        "corpus": (_opt_str, None),
        "embeddings": (_opt_str, None),
        "policy_table": (_opt_str, None),
        "lexicon": (_opt_str, None),
        "blocklist": (_opt_str, None),
        "external_scores": (_opt_str, None),
        "stance_juul": (_opt_str, None),
        "stance_cannabis": (_opt_str, None),
        "scored_corpus": (_opt_str, None),
    },
    "study": {
        "treatment_state": (str, "CA"),
        "legalization_date": (date.fromisoformat, None),
        "horizons": (_int_tuple, HORIZONS),
        "include_retweets": (_bool, True),
        "juul_threshold": (float, 0.1),
        "cannabis_threshold": (float, 0.5),
        "disable_bot_filter": (_bool, False),
    },
    "estimation": {
        "n_sims": (int, 200),
        "methods": (_str_tuple, ("IPTW-LR",)),
        "propensity_model": (str, "LR"),
        "trim_lo": (float, 0.05),
        "trim_hi": (float, 0.95),
        "ci_mode": (str, "paper_literal"),
        "min_group_size": (int, 2),
        "embedding_dim": (int, 25),
        "n_jobs": (int, 1),
        "gbm_rounds": (int, 100),
    },
    "weaklabel": {
        "confidence_threshold": (float, 0.8),
        "n_samples": (int, 20_000),
    },
    "synth": {
        "n_users": (int, 2000),
        "gamma": (float, 1.5),
        "tiers": (_str_tuple, ("T", "C1", "C2", "C3", "C4")),
        "tau": (lambda t: tuple(float(v) for v in _str_tuple(t)), (1.0, 0.5, 0.25, 0.0)),
        "dim": (int, 25),
        "stance_noise": (float, 0.1),
    },
    "run": {
        "seed": (int, 0),
    },
}


@dataclass
class RunConfig:
    """All settings of a pipeline run, grouped by INI section."""

    values: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, dotted):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def get(self, section, key):
        return self.values[section][key]

    @property
    def seed(self):
        return self.values["run"]["seed"]

    @property
    def legalization_date(self):
        d = self.values["study"]["legalization_date"]
        if d is not None:
            return d
        state = self.values["study"]["treatment_state"]
        if state not in LEGALIZATION_DATES:
            raise ConfigError("study.legalization_date", f"required for treatment state {state}")
        return LEGALIZATION_DATES[state]

    def path(self, key, required=True):
        value = self.values["paths"][key]
        if value is None:
            if required:
                raise ConfigError(f"paths.{key}", "not set")
            return None
        p = Path(value)
        p = p if p.is_absolute() else self.base_dir / p
        if required and not p.exists():
            raise ConfigError(f"paths.{key}", f"{p} does not exist")
        return p

    def estimation_settings(self):
        est, study = self.values["estimation"], self.values["study"]
        kind = est["propensity_model"].upper()
        methods = []
        for m in est["methods"]:
            m = m.upper()
            if m in ("IPTW", "PSM"):
                m = f"{m}-{kind}"
            if m not in METHODS and m != NAIVE:
                raise ConfigError("estimation.methods", f"unknown method {m!r}")
            methods.append(m)
        if est["ci_mode"] not in CI_MODES:
            raise ConfigError("estimation.ci_mode", f"must be one of {CI_MODES}")
        if est["n_sims"] < 1:
            raise ConfigError("estimation.n_sims", "must be >= 1")
        if not 0 <= est["trim_lo"] < est["trim_hi"] <= 1:
            raise ConfigError("estimation.trim_lo", "trim bounds must satisfy 0 <= lo < hi <= 1")
        return EstimationSettings(
            horizons=tuple(study["horizons"]), methods=tuple(methods),
            trim=(est["trim_lo"], est["trim_hi"]), ci_mode=est["ci_mode"], n_sims=est["n_sims"],
            master_seed=self.seed, min_group_size=est["min_group_size"], n_jobs=est["n_jobs"],
            gbm_rounds=est["gbm_rounds"],
        )

    def section_dict(self, *sections):
        """JSON-safe view of the given sections (all by default)."""
        out = {}
        for s in sections or self.values:
            out[s] = {k: _jsonable(v) for k, v in sorted(self.values[s].items())}
        return out

    def digest(self, *sections):
        text = json.dumps(self.section_dict(*sections), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, date):
        return v.isoformat()
    if isinstance(v, tuple):
        return list(v)
    return v


def _parse(section, key, raw):
    if section not in SCHEMA:
        raise ConfigError(section, "unknown section")
    if key not in SCHEMA[section]:
        raise ConfigError(f"{section}.{key}", "unknown field")
    parser, _ = SCHEMA[section][key]
    try:
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} ({exc})") from None


def load_config(path=None, overrides=None):
    """Defaults, then the INI file, then ``overrides`` (``{"section.key": text}``)."""
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError("config", f"{path} does not exist")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser.read(path, encoding="utf-8")
        for section in parser.sections():
            for key, raw in parser.items(section):
                values.setdefault(section, {})[key] = _parse(section, key, raw)
        base = path.parent.resolve()
    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(dotted, "override keys must look like section.key")
        section, key = dotted.split(".", 1)
        values[section][key] = _parse(section, key, raw)
    cfg = RunConfig(values, base)
    cfg.estimation_settings()
    return cfg


def write_config(values, path):
    """Write ``{section: {key: value}}`` as INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, keys in values.items():
        parser[section] = {k: _to_text(v) for k, v in keys.items() if v is not None}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def _to_text(v):
    if isinstance(v, (tuple, list)):
        return " ".join(str(x) for x in v)
    if isinstance(v, date):
        return v.isoformat()
    return str(v)
