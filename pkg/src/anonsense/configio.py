"""Run-configuration files and deterministic JSON/CSV emission.

Reports are serialized with sorted keys and plain ``repr`` floats, and CSV
floats are printed with 17 significant digits, so identical inputs always
produce byte-identical outputs.
"""

from __future__ import annotations

import json
import math
from typing import Any, Optional

from .combinatorics import FieldVector
from .engine import ProtocolConfig, validate_config
from .estimation import EstimateReport, OutcomeCounts
from .fisher import ScanRow
from .protocol import TracelessnessReport, Transcript
from .statevec import SenderAssignment

SCAN_CSV_HEADER = "n,a,q0,theta1,theta2,j22,log10_j22,flag"


class RunConfigError(ValueError):
    """A run-configuration document failed validation; message carries the path."""


# --------------------------------------------------------------------------
# reading

def parse_run_config(doc: dict, require_scenario: bool = True) -> dict[str, Any]:
    """Validate a run-configuration document and build the value objects.

    Returns a dict with keys ``config`` (ProtocolConfig), ``assignment``
    (SenderAssignment or None), ``rounds``, ``seed``, and ``scan`` (axis dict
    or None).  Unknown keys anywhere are rejected with the offending path.
    """
    _reject_unknown(doc, {"protocol", "scenario", "run", "scan"}, "$")
    if "protocol" not in doc:
        raise RunConfigError("$.protocol: section is required")
    config = _parse_protocol(doc["protocol"])
    assignment = None
    if "scenario" in doc:
        assignment = _parse_scenario(doc["scenario"], config)
    elif require_scenario:
        raise RunConfigError("$.scenario: section is required for simulation")
    rounds, seed = _parse_run(doc.get("run"))
    scan = _parse_scan(doc.get("scan"))
    return {"config": config, "assignment": assignment, "rounds": rounds,
            "seed": seed, "scan": scan}


def _parse_protocol(section) -> ProtocolConfig:
    path = "$.protocol"
    _require_mapping(section, path)
    _reject_unknown(section, {"n", "m_est", "t", "a", "q0", "q", "c"}, path)
    n = _require_int(section, "n", path)
    m_est = _require_int(section, "m_est", path)
    t = float(section.get("t", 1.0))
    if m_est == 1:
        config = ProtocolConfig.for_single_sender(n, t=t)
    elif m_est == 2:
        a = _require_int(section, "a", path)
        q0 = section.get("q0")
        if q0 is None and "q" not in section:
            raise RunConfigError(f"{path}.q0: required for m_est=2 (or give a full q vector)")
        config = ProtocolConfig.for_two_senders(n, a=a, q0=float(q0 if q0 is not None else 0.5), t=t)
    else:
        raise RunConfigError(f"{path}.m_est: must be 1 or 2, got {m_est}")
    if "q" in section:
        q = section["q"]
        if not isinstance(q, list) or len(q) != config.kmax + 1:
            raise RunConfigError(f"{path}.q: must be a list of {config.kmax + 1} weights")
        config = ProtocolConfig(n=config.n, m_est=config.m_est, t=config.t,
                                q=tuple(float(x) for x in q),
                                c_plus=config.c_plus, c_minus=config.c_minus, a=config.a)
    if "c" in section:
        overrides = section["c"]
        _require_mapping(overrides, f"{path}.c")
        c_plus, c_minus = list(config.c_plus), list(config.c_minus)
        for key, value in overrides.items():
            try:
                i, sign = int(key[:-1]), key[-1]
                if sign not in "+-" or not 0 <= i <= config.kmax:
                    raise ValueError
            except (ValueError, IndexError):
                raise RunConfigError(
                    f"{path}.c.{key}: keys must look like '0+' with index <= {config.kmax}"
                ) from None
            (c_plus if sign == "+" else c_minus)[i] = int(value)
        config = ProtocolConfig(n=config.n, m_est=config.m_est, t=config.t, q=config.q,
                                c_plus=tuple(c_plus), c_minus=tuple(c_minus), a=config.a)
    violations = validate_config(config)
    if violations:
        raise RunConfigError("; ".join(f"{path}: {v}" for v in violations))
    return config


def _parse_scenario(section, config: ProtocolConfig) -> SenderAssignment:
    path = "$.scenario"
    _require_mapping(section, path)
    _reject_unknown(section, {"sender_positions", "omegas"}, path)
    for key in ("sender_positions", "omegas"):
        if key not in section or not isinstance(section[key], list):
            raise RunConfigError(f"{path}.{key}: a list is required")
    omegas = tuple(float(w) for w in section["omegas"])
    fields = FieldVector(omegas=omegas, t=config.t)
    for violation in fields.violations():
        raise RunConfigError(f"{path}.omegas: {violation}")
    try:
        return SenderAssignment(
            n=config.n,
            sender_positions=tuple(int(p) for p in section["sender_positions"]),
            fields=fields,
        )
    except ValueError as exc:
        raise RunConfigError(f"{path}: {exc}") from None


def _parse_run(section) -> tuple[int, int]:
    if section is None:
        return 1, 0
    path = "$.run"
    _require_mapping(section, path)
    _reject_unknown(section, {"rounds", "seed"}, path)
    rounds = _require_int(section, "rounds", path)
    seed = int(section.get("seed", 0))
    if rounds < 1:
        raise RunConfigError(f"{path}.rounds: must be >= 1, got {rounds}")
    return rounds, seed


def _parse_scan(section) -> Optional[dict]:
    if section is None:
        return None
    path = "$.scan"
    _require_mapping(section, path)
    _reject_unknown(section, {"n", "q0", "theta1", "theta2"}, path)
    out = {}
    for key in ("n", "q0", "theta1", "theta2"):
        if key not in section or not isinstance(section[key], list) or not section[key]:
            raise RunConfigError(f"{path}.{key}: a nonempty list is required")
        out[key] = [math.inf if v == "inf" else float(v) for v in section[key]]
    return out


def load_counts(doc) -> OutcomeCounts:
    """Read an outcome-counts document ({'counts': {...}} or a full transcript)."""
    _require_mapping(doc, "$")
    if "counts" not in doc:
        raise RunConfigError("$.counts: section is required")
    counts = doc["counts"]
    _require_mapping(counts, "$.counts")
    try:
        parsed = {str(k): int(v) for k, v in counts.items()}
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"$.counts: {exc}") from None
    try:
        return OutcomeCounts.from_dict(parsed)
    except ValueError as exc:
        raise RunConfigError(f"$.counts: {exc}") from None


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise RunConfigError(f"{path}: expected a JSON object, got {type(obj).__name__}")


def _require_int(section, key, path):
    if key not in section:
        raise RunConfigError(f"{path}.{key}: required")
    value = section[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise RunConfigError(f"{path}.{key}: must be an integer, got {value!r}")
    return value


def _reject_unknown(obj, allowed, path):
    _require_mapping(obj, path)
    unknown = set(obj) - allowed
    if unknown:
        raise RunConfigError(f"{path}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


# --------------------------------------------------------------------------
# writing

def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def normalized_run_config(parsed: dict[str, Any]) -> dict:
    """Re-serialize a parsed run configuration into canonical document form.

    Parsing the result yields the same objects again (idempotent after one
    normalization pass), which keeps configuration files diffable.
    """
    config: ProtocolConfig = parsed["config"]
    protocol: dict[str, Any] = {
        "n": config.n,
        "m_est": config.m_est,
        "t": config.t,
        "q": list(config.q),
        # explicit 0/1 for every switch: overrides replace preset bits, so
        # omitting a cleared bit would resurrect it on re-parse
        "c": {
            f"{i}{sign}": vec[i]
            for i in range(config.kmax + 1)
            for sign, vec in (("+", config.c_plus), ("-", config.c_minus))
        },
    }
    if config.a is not None:
        protocol["a"] = config.a
    doc: dict[str, Any] = {"protocol": protocol}
    assignment = parsed.get("assignment")
    if assignment is not None:
        doc["scenario"] = {
            "sender_positions": list(assignment.sender_positions),
            "omegas": list(assignment.fields.omegas),
        }
    doc["run"] = {"rounds": parsed["rounds"], "seed": parsed["seed"]}
    if parsed.get("scan") is not None:
        doc["scan"] = {
            key: ["inf" if math.isinf(v) else v for v in values]
            for key, values in parsed["scan"].items()
        }
    return doc


def config_to_dict(config: ProtocolConfig) -> dict:
    return {
        "n": config.n,
        "m_est": config.m_est,
        "t": config.t,
        "q": list(config.q),
        "c_plus": list(config.c_plus),
        "c_minus": list(config.c_minus),
        "a": config.a,
    }


def estimate_to_dict(report: EstimateReport) -> dict:
    return {
        "m_est": report.theta_hat.m_est,
        "theta_hat": list(report.theta_hat.theta),
        "omega_hat": list(report.omega_hat),
        "log_likelihood": _jsonable_float(report.log_likelihood),
        "se_estimate": [_jsonable_float(v) for v in report.se_estimate],
        "crb_se": None if report.crb_se is None else list(report.crb_se),
        "converged": report.converged,
        "flags": list(report.flags),
    }


def transcript_to_dict(transcript: Transcript) -> dict:
    return {
        "config": config_to_dict(transcript.config),
        "rounds": transcript.rounds,
        "counts": dict(transcript.counts),
        "broadcast": estimate_to_dict(transcript.broadcast),
        "seed": transcript.seed,
    }


def tracelessness_to_dict(report: TracelessnessReport) -> dict:
    out = {
        "n": report.n,
        "m": report.m,
        "omegas": list(report.fields.omegas),
        "t": report.fields.t,
        "mode": report.mode,
        "n_subsets": report.n_subsets,
        "max_tv_distance": report.max_tv_distance,
        "tolerance": report.tolerance,
        "verdict": "pass" if report.verdict else "fail",
    }
    if report.p_value is not None:
        out["p_value"] = report.p_value
    return out


def scan_rows_to_csv(rows: list[ScanRow]) -> str:
    lines = [SCAN_CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            _format_count(row.n),
            _format_count(row.a),
            _format_float(row.q0),
            _format_float(row.theta1),
            _format_float(row.theta2),
            _format_float(row.j22),
            _format_float(row.log10_j22),
            row.flag,
        ]))
    return "\n".join(lines) + "\n"


def _format_count(x: float) -> str:
    return "inf" if math.isinf(x) else str(int(x))


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _jsonable_float(x: float):
    # JSON has no NaN/Infinity; the stdlib would emit non-standard tokens
    return None if (isinstance(x, float) and not math.isfinite(x)) else x
