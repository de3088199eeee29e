"""File formats: datasets, models, inequality reports, witness curves.

Everything is plain structured text (JSON); floats are serialized with
shortest round-trip notation, which preserves them bit-exactly.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .distill import BellInequality
from .lvmodel import LvModel
from .scenario import (Feature, MeasurementScenario, QuantumDataset,
                       ScenarioError, canonicalize_feature)


def _atomic_write(path, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bellforge-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _scenario_to_obj(s: MeasurementScenario):
    return {"n_sites": s.n_sites, "n_settings": s.n_settings,
            "axes": s.axes if s.axes is None else [list(map(list, a)) for a in s.axes]}


def _scenario_from_obj(obj) -> MeasurementScenario:
    axes = obj.get("axes")
    if axes is not None:
        axes = tuple(tuple(tuple(ax) for ax in site) for site in axes)
    return MeasurementScenario(n_sites=int(obj["n_sites"]),
                               n_settings=int(obj["n_settings"]), axes=axes)


def _feature_to_obj(f: Feature):
    return {"sites": [i for i, _ in f.terms], "settings": [a for _, a in f.terms]}


def _feature_from_obj(obj, scenario) -> Feature:
    return canonicalize_feature(list(zip(obj["sites"], obj["settings"])), scenario)


def save_dataset(d: QuantumDataset, path):
    entries = []
    for f, value, sigma in d.entries:
        e = _feature_to_obj(f)
        e["value"] = float(value)
        e["sigma"] = float(sigma)
        entries.append(e)
    obj = {"scenario": _scenario_to_obj(d.scenario), "entries": entries,
           "metadata": d.metadata}
    _atomic_write(path, json.dumps(obj, indent=1))


def load_dataset(path) -> QuantumDataset:
    with open(path) as fh:
        obj = json.load(fh)
    scenario = _scenario_from_obj(obj["scenario"])
    entries = tuple((_feature_from_obj(e, scenario), float(e["value"]),
                     float(e.get("sigma", 0.0))) for e in obj["entries"])
    return QuantumDataset(scenario=scenario, entries=entries,
                          metadata=obj.get("metadata", ""))


def save_model(m: LvModel, path, solver_state: dict | None = None):
    """Model file: the dataset layout with couplings in place of value/sigma."""
    entries = []
    for f, k in zip(m.features, m.couplings):
        e = _feature_to_obj(f)
        e["coupling"] = float(k)
        entries.append(e)
    obj = {"scenario": _scenario_to_obj(m.scenario), "entries": entries}
    if solver_state is not None:
        obj["solver_state"] = solver_state
    _atomic_write(path, json.dumps(obj, indent=1))


def load_model(path):
    with open(path) as fh:
        obj = json.load(fh)
    scenario = _scenario_from_obj(obj["scenario"])
    features = [_feature_from_obj(e, scenario) for e in obj["entries"]]
    couplings = [float(e["coupling"]) for e in obj["entries"]]
    return LvModel(scenario, features, couplings), obj.get("solver_state")


def inequality_report(ineq: BellInequality, frustrated: bool | None = None) -> dict:
    terms = []
    for idx, (f, c) in enumerate(zip(ineq.features, ineq.coefficients)):
        t = _feature_to_obj(f)
        t["coefficient"] = float(c)
        if ineq.fractions is not None:
            t["coefficient_exact"] = str(ineq.fractions[idx])
        terms.append(t)
    report = {
        "inequality": terms,
        "classical_bound": ineq.classical_bound,
        "classical_bound_negated": (None if ineq.classical_bound is None
                                    else -ineq.classical_bound),
        "bound_method": ineq.bound_method,
        "bound_certified": ineq.bound_certified,
        "quantum_value": ineq.quantum_value,
        "quantum_uncertainty": ineq.quantum_uncertainty,
        "violated": ineq.violated,
        "note": ineq.note,
    }
    if frustrated is not None:
        report["frustrated"] = frustrated
    return report


def save_report(report: dict, path):
    _atomic_write(path, json.dumps(report, indent=1))


def witness_curve_table(rows) -> str:
    """Tab-delimited (T, variance, beta_k, entanglement bound, verdict) table."""
    lines = ["T\tjz2_per_site\tbeta_k\tentanglement_bound\tverdict"]
    for t, var, beta, ent, verdict in rows:
        lines.append(f"{t!r}\t{var!r}\t{beta!r}\t{ent!r}\t{verdict}")
    return "\n".join(lines) + "\n"
