"""JSON run configurations: schema, validation and conversion to domain objects.

A configuration is one JSON document.  Every section is optional at the schema
level; each command checks that the sections it needs are present.  Schema
violations are reported with the line of the offending value.

Regional fractions may be written as numbers or as ratio strings such as
``"1/3"``, which are converted exactly before normalization checks.
"""

from fractions import Fraction
import json
import math

import jsonschema

from .design import DesignConfig, RegionDesignInput, check_feasibility
from .endpoints import (
    AdministrativeCensoring,
    BinaryEndpoint,
    ContinuousEndpoint,
    Exponential,
    NoCensoring,
    OmegaEndpoint,
    PiecewiseExponential,
    SurvivalPHEndpoint,
    SurvivalRMSTEndpoint,
    UniformCensoring,
    Weibull,
    omega_for,
)
from .errors import DomainError, MRCTError
from .model import RandomEffectsParams, naive_hyperparams

__all__ = [
    "SCHEMA_VERSION",
    "CONFIG_SCHEMA",
    "ConfigError",
    "load_config",
    "validate_config",
    "design_config",
    "region_inputs",
    "prior_params",
    "endpoint_specs",
    "simulation_config",
    "analysis_input",
]

SCHEMA_VERSION = "1"

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PROB = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_FRACTION = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        {"type": "string", "pattern": r"^\s*\d+(\.\d+)?\s*(/\s*\d+(\.\d+)?\s*)?$"},
    ]
}

_MODEL = {
    "type": "object",
    "required": ["family"],
    "oneOf": [
        {"properties": {"family": {"const": "exponential"}, "rate": _POS},
         "required": ["rate"]},
        {"properties": {"family": {"const": "piecewise_exponential"},
                        "early_rate": _POS, "late_rate": _POS, "change_point": _POS},
         "required": ["early_rate", "late_rate", "change_point"]},
        {"properties": {"family": {"const": "weibull"}, "shape": _POS, "scale": _POS},
         "required": ["shape", "scale"]},
    ],
}

_CENSORING = {
    "type": "object",
    "required": ["type"],
    "oneOf": [
        {"properties": {"type": {"const": "none"}}},
        {"properties": {"type": {"const": "administrative"}, "follow_up": _POS},
         "required": ["follow_up"]},
        {"properties": {"type": {"const": "uniform"}, "low": _NUM, "high": _POS},
         "required": ["low", "high"]},
    ],
}

_ENDPOINT = {
    "type": "object",
    "required": ["type"],
    "oneOf": [
        {"properties": {"type": {"const": "omega"}, "value": _POS}, "required": ["value"]},
        {"properties": {"type": {"const": "continuous"}, "sigma2_0": _POS, "sigma2_1": _POS}},
        {"properties": {"type": {"const": "binary"}, "p0": _PROB, "p1": _PROB},
         "required": ["p0", "p1"]},
        {"properties": {"type": {"const": "survival_ph"}, "lambda0": _POS, "hr": _POS,
                        "follow_up": _POS},
         "required": ["lambda0", "hr", "follow_up"]},
        {"properties": {"type": {"const": "survival_rmst"}, "control": _MODEL,
                        "treatment": _MODEL, "eta": _POS, "censoring": _CENSORING},
         "required": ["control", "treatment", "eta"]},
    ],
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mrct run configuration",
    "type": "object",
    "required": ["schema_version"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "description": {"type": "string"},
        "units": {"type": "object", "additionalProperties": {"type": "string"}},
        "design": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _PROB,
                "beta": _PROB,
                "pi": {"type": "number", "minimum": 0.5, "maximum": 1},
                "ell": _POS,
                "fractions": {"type": "array", "items": _FRACTION, "minItems": 1},
                "margin": {"type": "number", "minimum": 0},
                "margin_hr": {"type": "number", "minimum": 1},
                "assurance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "rounding": {"enum": ["ceil", "largest_remainder"]},
            },
        },
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta": _NUM,
                "tau": {"type": "number", "minimum": 0},
                "tau2": {"type": "number", "minimum": 0},
                "tau_over_delta": {"type": "number", "minimum": 0},
                "effects": {"type": "array", "items": _NUM, "minItems": 2},
                "from_endpoints": {"type": "boolean"},
                "decimals": {"type": ["integer", "null"], "minimum": 0},
            },
        },
        "endpoint": _ENDPOINT,
        "endpoints": {"type": "array", "items": _ENDPOINT, "minItems": 1},
        "region_ids": {"type": "array", "items": {"type": "string"}},
        "region": {"type": "integer", "minimum": 0},
        "n0": {"type": "integer", "minimum": 1},
        "profile": {
            "type": "object",
            "additionalProperties": False,
            "required": ["grid"],
            "properties": {
                "region": {"type": "integer", "minimum": 0},
                "grid": {"type": "array", "items": _PROB, "minItems": 1},
            },
        },
        "bound": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega": _POS,
                "f_r": {"type": "array", "items": _PROB},
                "n_regions": {"type": "array", "items": {"type": "integer", "minimum": 2}},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "required": ["regions"],
            "properties": {
                "scale": {"enum": ["identity", "log_hr"]},
                "alpha": _PROB,
                "pi": {"type": "number", "minimum": 0.5, "maximum": 1},
                "margin": {"type": "number", "minimum": 0},
                "margin_hr": {"type": "number", "minimum": 1},
                "ell": _POS,
                "ci_level": _PROB,
                "regions": {
                    "type": "array",
                    "minItems": 2,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["region", "estimate"],
                        "oneOf": [{"required": ["variance"]}, {"required": ["events"]}],
                        "properties": {
                            "region": {"type": "string"},
                            "estimate": _NUM,
                            "variance": _POS,
                            "events": {"type": "integer", "minimum": 1},
                        },
                    },
                },
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["endpoint"],
            "properties": {
                "endpoint": {"enum": ["normal", "binary", "survival_ph", "survival_rmst"]},
                "effects": {"type": "array", "items": _NUM},
                "sigma2_0": _POS,
                "sigma2_1": _POS,
                "p0": _PROB,
                "hazard_ratios": {"type": "array", "items": _POS},
                "lambda0": _POS,
                "follow_up": _POS,
                "controls": {"type": "array", "items": _MODEL},
                "treatments": {"type": "array", "items": _MODEL},
                "eta": _POS,
                "censoring": _CENSORING,
                "training_n": {"type": "integer", "minimum": 2},
                "m_design": {"type": "integer", "minimum": 1},
                "m_verify": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "benchmark_decimals": {"type": ["integer", "null"], "minimum": 0},
                "region_of_interest": {"type": "integer", "minimum": 0},
                "n_jobs": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ConfigError(MRCTError):
    """Unreadable, malformed or schema-violating configuration."""


# ---------------------------------------------------------------------------
# Line tracking
# ---------------------------------------------------------------------------

_DECODER = json.JSONDecoder()
_WS = " \t\n\r"


def _skip(text, i):
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def _line_map(text):
    """Map each JSON path (tuple of keys and indices) to its 1-based line."""
    lines = {}

    def line_of(i):
        return text.count("\n", 0, i) + 1

    def walk(i, path):
        i = _skip(text, i)
        lines[path] = line_of(i)
        ch = text[i]
        if ch == "{":
            i = _skip(text, i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = json.decoder.scanstring(text, _skip(text, i) + 1)
                i = _skip(text, i) + 1  # colon
                i = _skip(text, walk(i, path + (key,)))
                if text[i] == "}":
                    return i + 1
                i += 1  # comma
        if ch == "[":
            i = _skip(text, i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = _skip(text, walk(i, path + (k,)))
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        _, end = _DECODER.raw_decode(text, i)
        return end

    walk(0, ())
    return lines


def _tagged_branch_errors(err):
    """For a ``oneOf`` over objects tagged by ``type``, the errors of the
    branch whose tag matches, or an "unknown type" message."""
    if err.validator != "oneOf" or not isinstance(err.instance, dict):
        return None
    tag = err.instance.get("type")
    if tag is None:
        return None
    branches, known = {}, []
    for i, sub in enumerate(err.validator_value):
        const = sub.get("properties", {}).get("type", {}).get("const")
        if const is None:
            return None
        known.append(const)
        branches[const] = i
    if tag not in branches:
        return f"unknown type {tag!r}; expected one of {', '.join(map(repr, known))}"
    idx = branches[tag]
    return [e for e in err.context if e.relative_schema_path and e.relative_schema_path[0] == idx]


def _format_error(err, lines, path):
    chosen = _tagged_branch_errors(err)
    if isinstance(chosen, list) and chosen:
        return "\n".join(_format_error(e, lines, path) for e in chosen)
    message = chosen if isinstance(chosen, str) else err.message
    loc = tuple(err.absolute_path)
    while loc not in lines and loc:
        loc = loc[:-1]
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{path}:{lines.get(loc, 1)}: {where}: {message}"


def load_config(path):
    """Read and schema-validate a configuration file.

    Raises
    ------
    OSError
        If the file cannot be read.
    ConfigError
        On malformed JSON or schema violations; messages are ``path:line: ...``.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = _line_map(text)
        raise ConfigError("\n".join(_format_error(e, lines, path) for e in errors))
    return doc


def validate_config(path):
    """Schema plus semantic checks; returns a list of diagnostic strings.

    The first entry is ``"ok"`` when nothing is wrong.  Warnings (for example
    a prior beyond the feasibility bound) do not make the configuration
    invalid and follow the ``"ok"`` line; a ``"preview:"`` line lists the
    regional variance scales when they can be computed.

    Raises
    ------
    OSError, ConfigError
    """
    doc = load_config(path)
    problems, notes = [], []
    design = doc.get("design", {})
    if "fractions" in design:
        total = sum(_fraction(x) for x in design["fractions"])
        if total != 1 and abs(float(total) - 1.0) > 1e-9:
            problems.append(f"fractions sum to {float(total):.10g}")
    if problems:
        return problems
    try:
        cfg = design_config(doc) if "design" in doc else None
        if cfg is not None and ("endpoint" in doc or "endpoints" in doc):
            omegas = [r.omega for r in region_inputs(doc, cfg)]
            notes.append("preview: omega = " + ", ".join(f"{o:.6g}" for o in omegas))
        if cfg is not None and cfg.n_regions >= 2 and "prior" in doc:
            prior = prior_params(doc, cfg)
            feas = check_feasibility(prior, cfg, cfg.n_regions)
            if not feas.feasible:
                notes.append("warning: " + feas.message)
    except DomainError as exc:
        return [f"error: {exc}"]
    return ["ok"] + notes


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _fraction(x):
    if isinstance(x, str):
        return Fraction(x.replace(" ", ""))
    return Fraction(x).limit_denominator(10 ** 12) if isinstance(x, float) else Fraction(x)


def _require(doc, key, command=None):
    if key not in doc:
        what = f" for {command}" if command else ""
        raise ConfigError(f"configuration needs a {key!r} section{what}")
    return doc[key]


def _margin(section):
    if "margin_hr" in section:
        return math.log(section["margin_hr"])
    return float(section.get("margin", 0.0))


def design_config(doc):
    """:class:`DesignConfig` from the ``design`` section."""
    d = _require(doc, "design")
    fractions = [float(_fraction(x)) for x in d.get("fractions", ())]
    if not fractions:
        n = len(doc.get("endpoints", ())) or len(doc.get("region_ids", ()))
        fractions = [1.0 / n] * n if n else []
    return DesignConfig(
        alpha=d.get("alpha", 0.025),
        beta=d.get("beta", 0.1),
        pi=d.get("pi", 0.5),
        ell=d.get("ell", 1.0),
        fractions=tuple(fractions),
        margin=_margin(d),
        assurance=d.get("assurance", 0.8),
    )


def _model(spec):
    fam = spec["family"]
    if fam == "exponential":
        return Exponential(spec["rate"])
    if fam == "piecewise_exponential":
        return PiecewiseExponential(spec["early_rate"], spec["late_rate"], spec["change_point"])
    return Weibull(spec["shape"], spec["scale"])


def _censoring(spec):
    if spec is None or spec["type"] == "none":
        return NoCensoring()
    if spec["type"] == "administrative":
        return AdministrativeCensoring(spec["follow_up"])
    return UniformCensoring(spec["low"], spec["high"])


def _endpoint(spec):
    t = spec["type"]
    if t == "omega":
        return OmegaEndpoint(spec["value"])
    if t == "continuous":
        return ContinuousEndpoint(spec.get("sigma2_0", 1.0), spec.get("sigma2_1", 1.0))
    if t == "binary":
        return BinaryEndpoint(spec["p0"], spec["p1"])
    if t == "survival_ph":
        return SurvivalPHEndpoint(spec["lambda0"], spec["hr"], spec["follow_up"])
    return SurvivalRMSTEndpoint(
        _model(spec["control"]), _model(spec["treatment"]), spec["eta"],
        _censoring(spec.get("censoring")),
    )


def endpoint_specs(doc, n_regions):
    """One endpoint object per region (a single ``endpoint`` is repeated)."""
    if "endpoints" in doc:
        specs = [_endpoint(s) for s in doc["endpoints"]]
        if len(specs) != n_regions:
            raise DomainError(f"{len(specs)} endpoints for {n_regions} regions")
        return specs
    return [_endpoint(_require(doc, "endpoint"))] * n_regions


def _region_ids(doc, n):
    ids = doc.get("region_ids") or [f"region{i + 1}" for i in range(n)]
    if len(ids) != n:
        raise DomainError(f"{len(ids)} region ids for {n} regions")
    return ids


def region_inputs(doc, config):
    """``RegionDesignInput`` list in fraction order."""
    n = config.n_regions
    specs = endpoint_specs(doc, n)
    return [
        RegionDesignInput(rid, omega_for(s, config.ell))
        for rid, s in zip(_region_ids(doc, n), specs)
    ]


def prior_params(doc, config=None):
    """Prior mean and variance from the ``prior`` section.

    Accepts ``delta`` with ``tau``, ``tau2`` or ``tau_over_delta``, a list of regional
    ``effects``, or ``from_endpoints`` (effects implied by the endpoints).
    """
    p = _require(doc, "prior")
    if "effects" in p:
        return naive_hyperparams(p["effects"], decimals=p.get("decimals"))
    if p.get("from_endpoints"):
        if config is None:
            raise DomainError("from_endpoints needs the design section")
        effects = [s.effect for s in endpoint_specs(doc, config.n_regions)]
        return naive_hyperparams(effects, decimals=p.get("decimals"))
    if "delta" not in p:
        raise ConfigError("prior needs delta, effects or from_endpoints")
    delta = float(p["delta"])
    if "tau2" in p:
        return RandomEffectsParams(delta, float(p["tau2"]))
    if "tau_over_delta" in p:
        return RandomEffectsParams.from_tau(delta, p["tau_over_delta"] * delta)
    return RandomEffectsParams.from_tau(delta, p.get("tau", 0.0))


def analysis_input(doc):
    """:class:`~mrctdesign.analysis.TrialAnalysisInput` from ``analysis``."""
    from .analysis import TrialAnalysisInput, schoenfeld_sigma2, summaries_from_hr
    from .model import RegionalSummary

    a = _require(doc, "analysis", "analyze")
    ell = a.get("ell", 1.0)
    scale = a.get("scale", "identity")
    ids, est, var = [], [], []
    for row in a["regions"]:
        ids.append(row["region"])
        est.append(row["estimate"])
        var.append(row["variance"] if "variance" in row else schoenfeld_sigma2(row["events"], ell))
    if scale == "log_hr":
        summaries = summaries_from_hr(ids, est, var)
    else:
        summaries = [RegionalSummary(i, x, v) for i, x, v in zip(ids, est, var)]
    return TrialAnalysisInput(
        summaries=tuple(summaries),
        margin=_margin(a),
        alpha=a.get("alpha", 0.025),
        pi=a.get("pi", 0.5),
        scale=scale,
        ci_level=a.get("ci_level", 0.95),
    )


def simulation_config(doc, seed=None, m_design=None, m_verify=None):
    """:class:`~mrctdesign.simulation.SimulationConfig`; CLI overrides win."""
    from .simulation import (
        BinaryScenario,
        NormalScenario,
        ProportionalHazardsScenario,
        RMSTScenario,
        SimulationConfig,
    )

    s = _require(doc, "simulation", "simulate")
    kind = s["endpoint"]
    if kind == "normal":
        scen = NormalScenario(tuple(s["effects"]), s.get("sigma2_0", 1.0), s.get("sigma2_1", 1.0))
    elif kind == "binary":
        scen = BinaryScenario(tuple(s["effects"]), s.get("p0", 0.3))
    elif kind == "survival_ph":
        scen = ProportionalHazardsScenario(
            tuple(s["hazard_ratios"]), s.get("lambda0", 0.05), s.get("follow_up", 36.0)
        )
    else:
        scen = RMSTScenario(
            tuple(_model(m) for m in s["controls"]),
            tuple(_model(m) for m in s["treatments"]),
            s.get("eta", 80.0),
            _censoring(s.get("censoring", {"type": "uniform", "low": 0.0, "high": 240.0})),
        )
    dcfg = design_config(doc) if "design" in doc else DesignConfig(
        fractions=(1.0 / scen.n_regions,) * scen.n_regions
    )
    return SimulationConfig(
        scenario=scen,
        design=dcfg,
        training_n=s.get("training_n", 1000),
        m_design=m_design if m_design is not None else s.get("m_design", 1000),
        m_verify=m_verify if m_verify is not None else s.get("m_verify", 1000),
        master_seed=seed if seed is not None else s.get("master_seed", 20240101),
        region_of_interest=s.get("region_of_interest", 0),
        benchmark_decimals=s.get("benchmark_decimals"),
        rounding=doc.get("design", {}).get("rounding", "ceil"),
    ), s.get("n_jobs", 1)
