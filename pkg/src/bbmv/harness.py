"""End-to-end pipeline: gravitational entanglement, transfer, Bell test, audits, report.

Configuration files are YAML. ``RunConfig.from_dict`` documents the schema;
every key is optional and falls back to ``default_run_config``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import __version__
from .bell import (
    HOEFFDING_FORMULA,
    PAIRS,
    CHSHEstimate,
    SettingsQuad,
    chsh_combination,
    chsh_value,
    estimate_chsh,
    optimize_settings,
    pair_label,
    run_trials,
)
from .bmv import (
    BMVConfig,
    Coupling,
    InteractionDeclaration,
    check_condition_1,
    check_condition_2,
    default_bmv_config,
    default_interactions,
    evolve_bmv,
    initial_spin_state,
    tune_for_singlet,
)
from .causal import AUDITS, ExperimentSchedule, reference_schedule, run_audits
from .errors import BBMVError, ConfigError, StageError
from .lhv import CorrelationTable, LocalLHVModel, SettingAwareLHVModel, best_lhv_fit
from .quantum import fidelity, negativity, singlet
from .reports import FAIL, PASS, CheckResult
from .transfer import TransferConfig, check_condition_3, transfer_to_photons

MODELS = ("quantum", "local_lhv", "setting_aware_lhv")

QUANTUM_CONSISTENT = "quantum_consistent_local_excluded"
LOCAL_NOT_EXCLUDED = "local_not_excluded"
CONDITIONS_VIOLATED = "conditions_violated"
AUDITS_FAILED = "audits_failed"

DEFAULT_WIRING = {"wing1": "photon1", "wing2": "photon2"}
SIGNIFICANT_DIGITS = 12


def _num(value, name):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


@dataclass(frozen=True)
class RunConfig:
    bmv: BMVConfig = field(default_factory=default_bmv_config)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    settings: object = "optimize"
    trials: int = 1_000_000
    seed: int = 20211
    model: str = "quantum"
    detection_prob: float = 1.0
    schedule: ExperimentSchedule = field(default_factory=reference_schedule)
    singlet_fidelity_threshold: float = 0.99
    audits: tuple = tuple(AUDITS)
    significance: float = 1e-6
    tune_bmv: bool = True
    interactions: InteractionDeclaration = field(default_factory=default_interactions)
    wiring: dict = field(default_factory=lambda: dict(DEFAULT_WIRING))

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if not (isinstance(self.settings, SettingsQuad) or self.settings == "optimize"):
            raise ConfigError("settings must be a SettingsQuad or 'optimize'")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        for name in ("detection_prob", "singlet_fidelity_threshold", "significance"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        unknown = set(self.audits) - set(AUDITS)
        if unknown:
            raise ConfigError(f"unknown audits {sorted(unknown)}")
        object.__setattr__(self, "audits", tuple(self.audits))
        object.__setattr__(self, "trials", int(self.trials))

    def to_dict(self) -> dict:
        return {
            "bmv": {**self.bmv.to_dict(), "tune": self.tune_bmv},
            "transfer": self.transfer.to_dict(),
            "settings": self.settings if self.settings == "optimize" else self.settings.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "model": self.model,
            "detection_prob": self.detection_prob,
            "schedule": self.schedule.to_dict(),
            "singlet_fidelity_threshold": self.singlet_fidelity_threshold,
            "audits": list(self.audits),
            "significance": self.significance,
            "interactions": self.interactions.to_dict(),
            "wiring": dict(self.wiring),
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> RunConfig:
        """Build a config from nested mappings.

        Keys: ``bmv`` (mass1, mass2 [kg], fall_time [s], branch_distance
        {LL, LR, RL, RR} [m], dephasing_rate [1/s], gravitational_constant,
        reduced_planck, tune), ``transfer`` (swap_fidelity_mode,
        depolarizing_probability_side1/2), ``settings`` ('optimize' or
        {a, a_prime, b, b_prime} [rad]), ``trials``, ``seed``, ``model``,
        ``detection_prob``, ``schedule`` ({label: {t, x}}, c = 1; listed events
replace the default ones and ``null`` removes one),
        ``singlet_fidelity_threshold``, ``audits``, ``significance``,
        ``interactions`` ({systems, couplings: [{a, b, kind, stage}]}) and
        ``wiring`` ({wing1, wing2} measured system labels).
        """
        d = dict(d or {})
        base = default_run_config()
        unknown = set(d) - set(base.to_dict())
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            kw = {}
            if "bmv" in d:
                b = {**base.bmv.to_dict(), "tune": base.tune_bmv, **(d["bmv"] or {})}
                kw["tune_bmv"] = bool(b.pop("tune"))
                b["branch_distance"] = {k: _num(v, f"branch_distance.{k}") for k, v in b["branch_distance"].items()}
                for k in set(b) - {"branch_distance"}:
                    b[k] = _num(b[k], f"bmv.{k}")
                kw["bmv"] = BMVConfig(**b)
            if "transfer" in d:
                t = {**base.transfer.to_dict(), **(d["transfer"] or {})}
                for k in ("depolarizing_probability_side1", "depolarizing_probability_side2"):
                    t[k] = _num(t[k], f"transfer.{k}")
                kw["transfer"] = TransferConfig(**t)
            if "settings" in d:
                s = d["settings"]
                kw["settings"] = s if s == "optimize" else SettingsQuad(
                    *(_num(s[k], f"settings.{k}") for k in ("a", "a_prime", "b", "b_prime")))
            for k in ("detection_prob", "singlet_fidelity_threshold", "significance"):
                if k in d:
                    kw[k] = _num(d[k], k)
            for k in ("trials", "seed"):
                if k in d:
                    kw[k] = int(_num(d[k], k))
            if "model" in d:
                kw["model"] = d["model"]
            if "audits" in d:
                kw["audits"] = tuple(d["audits"] or ())
            if "schedule" in d:
                merged = {**base.schedule.to_dict(), **(d["schedule"] or {})}
                kw["schedule"] = ExperimentSchedule.from_dict({k: v for k, v in merged.items() if v is not None})
            if "interactions" in d:
                i = d["interactions"]
                kw["interactions"] = InteractionDeclaration(
                    tuple(i.get("systems", ())),
                    tuple(Coupling(c["a"], c["b"], c["kind"], int(c["stage"])) for c in i.get("couplings", ())),
                )
            if "wiring" in d:
                kw["wiring"] = {**DEFAULT_WIRING, **d["wiring"]}
            return replace(base, **kw)
        except ConfigError:
            raise
        except (BBMVError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def default_run_config() -> RunConfig:
    return RunConfig()


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return RunConfig.from_dict(data)


def check_condition_4(cfg: RunConfig) -> CheckResult:
    """Wing i measures the photon-i qubit."""
    messages = []
    for wing in (1, 2):
        target = cfg.wiring.get(f"wing{wing}")
        if target != f"photon{wing}":
            messages.append(f"wing {wing} measures {target!r}, expected 'photon{wing}'")
    return CheckResult("condition_4", FAIL if messages else PASS, tuple(messages), {"wiring": dict(cfg.wiring)})


def check_target_state(singlet_fidelity: float, threshold: float) -> CheckResult:
    ok = singlet_fidelity >= threshold
    msg = () if ok else (f"photon-pair singlet fidelity {singlet_fidelity:.12g} below {threshold:g}",)
    return CheckResult("target_state", PASS if ok else FAIL, msg,
                       {"singlet_fidelity": singlet_fidelity, "threshold": threshold})


# -- report -------------------------------------------------------------------

def round_sig(obj, digits: int = SIGNIFICANT_DIGITS):
    """Recursively round floats to ``digits`` significant digits."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.{digits}g}") if math.isfinite(x) else x
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return type(obj)(round_sig(v, digits) for v in obj)
    return obj


@dataclass(frozen=True)
class ExperimentReport:
    stage1: dict
    stage2: dict
    stage3: CHSHEstimate
    exact: dict
    condition_checks: dict
    audit_results: dict
    criteria: dict
    verdict: str
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "stage1": self.stage1,
            "stage2": self.stage2,
            "stage3": self.stage3.to_dict(),
            "exact": self.exact,
            "condition_checks": {k: v.to_dict() for k, v in self.condition_checks.items()},
            "audit_results": {k: v.to_dict() for k, v in self.audit_results.items()},
            "criteria": self.criteria,
            "verdict": self.verdict,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentReport:
        return cls(
            d["stage1"], d["stage2"], CHSHEstimate.from_dict(d["stage3"]), d["exact"],
            {k: CheckResult.from_dict(v) for k, v in d["condition_checks"].items()},
            {k: CheckResult.from_dict(v) for k, v in d["audit_results"].items()},
            d["criteria"], d["verdict"], d["provenance"],
        )

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def derive_verdict(condition_checks: dict, audit_results: dict, stage3: CHSHEstimate, significance: float) -> str:
    """Verdict lattice: conditions_violated > audits_failed > local_not_excluded > quantum-consistent."""
    if not all(c.passed for c in condition_checks.values()):
        return CONDITIONS_VIOLATED
    if not all(a.passed for a in audit_results.values()):
        return AUDITS_FAILED
    if not stage3.p_value_local < significance:
        return LOCAL_NOT_EXCLUDED
    return QUANTUM_CONSISTENT


def report_verdict(report: ExperimentReport) -> str:
    return derive_verdict(report.condition_checks, report.audit_results, report.stage3,
                          report.criteria["significance"])


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except BBMVError as exc:
        raise StageError(name, exc) from exc


def _outcome_model(cfg: RunConfig, rho_photons, quad):
    if cfg.model == "quantum":
        return rho_photons
    table = CorrelationTable.from_state(rho_photons, quad)
    if cfg.model == "local_lhv":
        mix, _ = best_lhv_fit(table)
        return LocalLHVModel(mix)
    return SettingAwareLHVModel(table)


def run_experiment(cfg: RunConfig, workers: int = 1) -> ExperimentReport:
    bmv_cfg = _stage("bmv", tune_for_singlet, cfg.bmv) if cfg.tune_bmv else cfg.bmv
    stage1 = _stage("bmv", evolve_bmv, bmv_cfg)
    rho_p = _stage("transfer", transfer_to_photons, stage1.state, cfg.transfer)
    if cfg.settings == "optimize":
        quad, _ = _stage("bell", optimize_settings, rho_p)
    else:
        quad = cfg.settings
    model = _stage("bell", _outcome_model, cfg, rho_p, quad)
    records = _stage("bell", run_trials, model, quad, cfg.trials, cfg.seed, cfg.detection_prob, workers)
    estimate = _stage("bell", estimate_chsh, records)
    if cfg.model == "quantum":
        exact_model = chsh_value(rho_p, quad)
    else:
        exact_model = chsh_combination([model.exact_correlations()[p] for p in PAIRS])

    photon_fidelity = fidelity(rho_p, singlet())
    conditions = {
        "condition_1": _stage("bmv", check_condition_1, initial_spin_state()),
        "condition_2": _stage("bmv", check_condition_2, cfg.interactions),
        "condition_3": _stage("transfer", check_condition_3, cfg.interactions),
        "condition_4": check_condition_4(cfg),
        "target_state": check_target_state(round_sig(photon_fidelity), cfg.singlet_fidelity_threshold),
    }
    audits = _stage("audit", run_audits, cfg.schedule, cfg.audits)

    stage1_summary = {**stage1.summary(), "fall_time": bmv_cfg.fall_time}
    stage2_summary = {"singlet_fidelity": photon_fidelity, "negativity": negativity(rho_p)}
    exact = {
        "settings": quad.to_dict(),
        "s_value_quantum": chsh_value(rho_p, quad),
        "s_value_model": exact_model,
        "model": cfg.model,
        "detection_rate": estimate.detection_rate,
        "p_value_method": HOEFFDING_FORMULA,
    }
    estimate = CHSHEstimate.from_dict(round_sig(estimate.to_dict()))
    conditions = {k: CheckResult.from_dict(round_sig(v.to_dict())) for k, v in conditions.items()}
    audits = {k: CheckResult.from_dict(round_sig(v.to_dict())) for k, v in audits.items()}
    criteria = {"significance": cfg.significance, "singlet_fidelity_threshold": cfg.singlet_fidelity_threshold}
    verdict = derive_verdict(conditions, audits, estimate, cfg.significance)
    return ExperimentReport(
        round_sig(stage1_summary), round_sig(stage2_summary), estimate, round_sig(exact), conditions,
        audits, round_sig(criteria), verdict,
        {"seed": cfg.seed, "config_digest": cfg.digest(), "tool_version": __version__},
    )


FORMATS = ("json", "csv-summary")


def emit_report(report: ExperimentReport, format: str = "json") -> str:
    if format == "json":
        return json.dumps(round_sig(report.to_dict()), indent=2, sort_keys=True) + "\n"
    if format == "csv-summary":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "count", "mean_product", "stderr", "s_value", "p_value_local", "verdict"])
        est = report.stage3
        for pair, n, mean, se in zip(PAIRS, est.per_pair_counts, est.per_pair_means, est.per_pair_stderr):
            w.writerow([pair_label(pair), n, _fmt(mean), _fmt(se), "", "", ""])
        w.writerow(["summary", est.detected_trials, "", _fmt(est.standard_error), _fmt(est.s_value),
                    _fmt(est.p_value_local), report.verdict])
        return buf.getvalue()
    raise ValueError(f"unsupported report format {format!r}; use one of {FORMATS}")


def _fmt(x: float) -> str:
    return f"{x:.{SIGNIFICANT_DIGITS}g}"


def parse_report(text: str) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(text))


def write_atomic(path, content: str) -> None:
    """Write via a temporary sibling file and rename, so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- sweeps -------------------------------------------------------------------

BOTH_SIDES = "transfer.depolarizing_probability"


def with_field(cfg: RunConfig, path: str, value) -> RunConfig:
    """Copy of ``cfg`` with one dotted config field replaced.

    ``transfer.depolarizing_probability`` sets both sides and switches the
    transfer to depolarizing mode.
    """
    d = cfg.to_dict()
    if path == BOTH_SIDES:
        d["transfer"].update(swap_fidelity_mode="depolarizing", depolarizing_probability_side1=value,
                             depolarizing_probability_side2=value)
        return RunConfig.from_dict(d)
    node = d
    keys = path.split(".")
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"unknown config field {path!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config field {path!r}")
    node[keys[-1]] = value
    return RunConfig.from_dict(d)


def exact_photon_chsh(cfg: RunConfig, quad: SettingsQuad | None = None) -> float:
    """Analytic CHSH value of the photon pair, without sampling."""
    bmv_cfg = tune_for_singlet(cfg.bmv) if cfg.tune_bmv else cfg.bmv
    rho_p = transfer_to_photons(evolve_bmv(bmv_cfg).state, cfg.transfer)
    if quad is None:
        quad = optimize_settings(rho_p)[0] if cfg.settings == "optimize" else cfg.settings
    return chsh_value(rho_p, quad)


def _photon_quad(cfg: RunConfig) -> SettingsQuad:
    if cfg.settings != "optimize":
        return cfg.settings
    bmv_cfg = tune_for_singlet(cfg.bmv) if cfg.tune_bmv else cfg.bmv
    return optimize_settings(transfer_to_photons(evolve_bmv(bmv_cfg).state, cfg.transfer))[0]


def sweep(cfg: RunConfig, path: str, values, exact_only: bool = False, workers: int = 1) -> list:
    """One row per value: exact CHSH and, unless ``exact_only``, the sampled estimate and verdict.

    Local depolarizing rescales every correlation uniformly, so for the
    depolarizing field the optimal settings at the first grid point are
    reused across the sweep.
    """
    rows = []
    shared_quad = _photon_quad(with_field(cfg, path, values[0])) if path == BOTH_SIDES else None
    for v in values:
        c = with_field(cfg, path, v)
        row = {"field": path, "value": v, "exact_s_value": exact_photon_chsh(c, shared_quad)}
        if not exact_only:
            if shared_quad is not None and c.settings == "optimize":
                c = replace(c, settings=shared_quad)
            rep = run_experiment(c, workers=workers)
            row.update(s_value=rep.stage3.s_value, standard_error=rep.stage3.standard_error,
                       p_value_local=rep.stage3.p_value_local, verdict=rep.verdict)
        rows.append(round_sig(row))
    return rows


def sweep_csv(rows: list) -> str:
    cols = ["field", "value", "exact_s_value", "s_value", "standard_error", "p_value_local", "verdict"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in cols])
    return buf.getvalue()


def locate_crossing(values, s_values, fn, level: float = 2.0, tol: float = 1e-12) -> float | None:
    """First crossing of ``level`` bracketed by the sweep, refined by bisection on ``fn``."""
    diffs = [abs(s) - level for s in s_values]
    for i in range(len(values) - 1):
        if diffs[i] == 0:
            return float(values[i])
        if diffs[i] * diffs[i + 1] < 0:
            lo, hi = float(values[i]), float(values[i + 1])
            f_lo = abs(fn(lo)) - level
            while hi - lo > tol:
                mid = (lo + hi) / 2
                f_mid = abs(fn(mid)) - level
                if (f_mid > 0) == (f_lo > 0):
                    lo, f_lo = mid, f_mid
                else:
                    hi = mid
            return (lo + hi) / 2
    return None


def depolarizing_breakeven(cfg: RunConfig | None = None, num: int = 50) -> float | None:
    """Per-side depolarizing probability at which the exact CHSH value falls to 2."""
    cfg = cfg or default_run_config()
    grid = list(np.linspace(0.0, 1.0, num))
    quad = _photon_quad(with_field(cfg, BOTH_SIDES, 0.0))
    s_values = [exact_photon_chsh(with_field(cfg, BOTH_SIDES, p), quad) for p in grid]
    return locate_crossing(grid, s_values, lambda p: exact_photon_chsh(with_field(cfg, BOTH_SIDES, p), quad))
