"""Measurement scenarios, feature algebra and quantum-data containers.

Everything downstream (the local-variable model, the Monte Carlo engine,
the solver) indexes the classical variables through the flattened slot
convention ``slot = site * n_settings + setting``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VALUE_SLACK = 1e-9
AXIS_NORM_TOL = 1e-12


class ScenarioError(ValueError):
    """Base class for scenario/data validation failures."""


class OutOfBounds(ScenarioError):
    pass


class DuplicateVariable(ScenarioError):
    pass


class ValueOutOfRange(ScenarioError):
    pass


class DuplicateFeature(ScenarioError):
    pass


class ScenarioMismatch(ScenarioError):
    pass


@dataclass(frozen=True)
class MeasurementScenario:
    """An (N, k, 2) Bell-test layout.

    Parameters
    ----------
    n_sites : int
        Number of spatially separated degrees of freedom (N).
    n_settings : int
        Number of measurement settings per site (k).
    axes : tuple or None
        Optional per-site tuple of k unit 3-vectors giving the measurement
        directions. Purely descriptive for the classical pipeline.
    """

    n_sites: int
    n_settings: int
    axes: tuple | None = None
    n_outcomes: int = field(default=2)

    def __post_init__(self):
        if self.n_sites < 1 or self.n_settings < 1:
            raise ScenarioError("n_sites and n_settings must be >= 1")
        if self.n_outcomes != 2:
            raise ScenarioError("only binary outcomes (p = 2) are supported")
        if self.axes is not None:
            axes = tuple(tuple(tuple(float(x) for x in ax) for ax in site_axes)
                         for site_axes in self.axes)
            if len(axes) != self.n_sites:
                raise ScenarioError("axes must list one axis set per site")
            for site_axes in axes:
                if len(site_axes) != self.n_settings:
                    raise ScenarioError("each site needs one axis per setting")
                for ax in site_axes:
                    if len(ax) != 3:
                        raise ScenarioError("axes must be 3-vectors")
                    if abs(np.linalg.norm(ax) - 1.0) > AXIS_NORM_TOL:
                        raise ScenarioError(f"axis {ax} is not unit-norm")
            object.__setattr__(self, "axes", axes)

    @property
    def n_variables(self) -> int:
        return self.n_sites * self.n_settings

    def slot(self, site: int, setting: int) -> int:
        """Flattened index of the classical variable sigma_setting^(site)."""
        self._check_indices(site, setting)
        return site * self.n_settings + setting

    def _check_indices(self, site: int, setting: int):
        if not (0 <= site < self.n_sites):
            raise OutOfBounds(f"site {site} outside [0, {self.n_sites})")
        if not (0 <= setting < self.n_settings):
            raise OutOfBounds(f"setting {setting} outside [0, {self.n_settings})")


@dataclass(frozen=True)
class Feature:
    """A monomial of measurement outputs: a product over (site, setting) pairs.

    The terms are kept sorted lexicographically with no duplicates, so two
    features are equal iff their term tuples are equal.
    """

    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ScenarioError("a feature must reference at least one variable")
        if list(self.terms) != sorted(self.terms):
            raise ScenarioError("feature terms must be sorted; use canonicalize_feature")
        if len(set(self.terms)) != len(self.terms):
            raise DuplicateVariable(f"duplicate variable in feature {self.terms}")

    @property
    def degree(self) -> int:
        return len(self.terms)

    def slots(self, scenario: MeasurementScenario) -> tuple:
        return tuple(scenario.slot(i, a) for i, a in self.terms)

    def __str__(self):
        return "*".join(f"s[{i},{a}]" for i, a in self.terms)


def canonicalize_feature(raw, scenario: MeasurementScenario | None = None) -> Feature:
    """Sort a raw list of (site, setting) pairs into a canonical Feature.

    Raises ``DuplicateVariable`` on repeated pairs (sigma^2 = 1 terms must be
    simplified by the caller) and ``OutOfBounds`` if a scenario is given and
    an index falls outside it.
    """
    pairs = [(int(i), int(a)) for i, a in raw]
    if scenario is not None:
        for i, a in pairs:
            scenario._check_indices(i, a)
    if len(set(pairs)) != len(pairs):
        raise DuplicateVariable(f"duplicate variable in {pairs}")
    return Feature(terms=tuple(sorted(pairs)))


class SpinConfiguration:
    """Dense assignment of +-1 values to every (site, setting) slot."""

    __slots__ = ("scenario", "values")

    def __init__(self, scenario: MeasurementScenario, values):
        values = np.asarray(values, dtype=np.int8).reshape(scenario.n_variables)
        if not np.all(np.abs(values) == 1):
            raise ScenarioError("spins must be exactly -1 or +1")
        self.scenario = scenario
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def all_up(cls, scenario: MeasurementScenario) -> "SpinConfiguration":
        return cls(scenario, np.ones(scenario.n_variables, dtype=np.int8))

    def get(self, site: int, setting: int) -> int:
        return int(self.values[self.scenario.slot(site, setting)])

    def flipped(self, site: int, setting: int) -> "SpinConfiguration":
        v = self.values.copy()
        v[self.scenario.slot(site, setting)] *= -1
        return SpinConfiguration(self.scenario, v)


def evaluate_feature(f: Feature, c: SpinConfiguration) -> int:
    """Product of the spins referenced by the feature; always +-1."""
    out = 1
    for slot in f.slots(c.scenario):
        out *= int(c.values[slot])
    return out


@dataclass(frozen=True)
class QuantumDataset:
    """Measured moments: feature -> (value, uncertainty), plus provenance.

    ``entries`` is a tuple of (Feature, value, sigma) triples. Construction
    does not validate; call :func:`validate_dataset` to get a checked copy.
    """

    scenario: MeasurementScenario
    entries: tuple
    metadata: str = ""

    @property
    def features(self) -> list:
        return [f for f, _, _ in self.entries]

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v, _ in self.entries], dtype=float)

    @property
    def uncertainties(self) -> np.ndarray:
        return np.array([s for _, _, s in self.entries], dtype=float)


def validate_dataset(d: QuantumDataset) -> QuantumDataset:
    """Return a canonicalized, deduplicate-checked copy of the dataset.

    Every violation found is reported in a single ``ScenarioError`` listing
    all problems, so a bad file surfaces all its defects at once.
    """
    problems = []
    seen = {}
    canonical = []
    for idx, (f, value, sigma) in enumerate(d.entries):
        try:
            if isinstance(f, Feature):
                cf = canonicalize_feature(f.terms, d.scenario)
            else:
                cf = canonicalize_feature(f, d.scenario)
        except OutOfBounds as exc:
            problems.append(f"entry {idx}: scenario mismatch ({exc})")
            continue
        except DuplicateVariable as exc:
            problems.append(f"entry {idx}: {exc}")
            continue
        value = float(value)
        sigma = float(sigma)
        if abs(value) > 1.0 + VALUE_SLACK:
            problems.append(
                f"entry {idx}: value {value} outside [-1, 1] "
                "(moments of +-1 products cannot exceed 1)")
        if sigma < 0:
            problems.append(f"entry {idx}: negative uncertainty {sigma}")
        if cf in seen:
            problems.append(f"entry {idx}: duplicate feature {cf} (first at {seen[cf]})")
        else:
            seen[cf] = idx
        canonical.append((cf, value, sigma))
    if problems:
        kinds = {
            "outside [-1, 1]": ValueOutOfRange,
            "duplicate feature": DuplicateFeature,
            "scenario mismatch": ScenarioMismatch,
        }
        exc_cls = ScenarioError
        for needle, cls in kinds.items():
            if all(needle in p for p in problems):
                exc_cls = cls
                break
        raise exc_cls("; ".join(problems))
    return QuantumDataset(scenario=d.scenario, entries=tuple(canonical),
                          metadata=d.metadata)
