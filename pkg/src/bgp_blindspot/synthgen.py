"""Seeded synthetic BGP feature series: benign churn plus three anomaly signatures.

Benign bins draw count features from a Poisson law whose rate follows a
daily cycle, ``lambda_f * (1 + a * sin(2*pi*bin / 1440))``, and statistic
features from a normal law clipped at zero.  Three injectors rewrite a
window of a benign series:

``storm``
    high-complexity burst (rates x intensity, overdispersed, long paths,
    large edit distances).
``signal_loss``
    every feature is exactly zero, as when the collector's sessions drop.
``low_deviation``
    two count features get a small rate bump that stays inside benign
    variability.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .dataset import ANOMALOUS, BENIGN, FeatureSchema, FeatureSeries
from .errors import InvalidInputError

COUNT = "count"
STATISTIC = "statistic"

DAY_BINS = 1440

SCENARIO_KINDS = ("storm", "signal_loss", "low_deviation")
DEFAULT_INTENSITY = {"storm": 25.0, "signal_loss": 1.0, "low_deviation": 1.0}


@dataclass(frozen=True)
class FeatureSpec:
    """Generation parameters for one feature.

    ``mean`` is the Poisson rate for count features and the normal mean for
    statistic features; ``std`` is only used by statistic features.  ``role``
    tags the features a storm treats specially (``"path_length"`` or
    ``"edit_distance"``).
    """

    name: str
    kind: str
    mean: float
    std: float = 0.0
    role: str | None = None

    def __post_init__(self):
        if self.kind not in (COUNT, STATISTIC):
            raise InvalidInputError(f"{self.name}: kind must be 'count' or 'statistic'")
        if self.kind == COUNT and not self.mean > 0:
            raise InvalidInputError(f"{self.name}: count rate must be > 0")
        if self.kind == STATISTIC and not self.std >= 0:
            raise InvalidInputError(f"{self.name}: std must be >= 0")
        if self.role not in (None, "path_length", "edit_distance"):
            raise InvalidInputError(f"{self.name}: unknown role {self.role!r}")


# Lightly loaded collector peer with a strong day/night cycle: night-time
# update counts fall to a tenth of the daily mean, and the per-bin path and
# edit-distance statistics are dispersed about as widely as their means, so
# benign traffic already contains many near-zero entries.
DEFAULT_FEATURES = (
    FeatureSpec("n_announcements", COUNT, 40.0),
    FeatureSpec("n_withdrawals", COUNT, 12.0),
    FeatureSpec("n_new_paths", COUNT, 8.0),
    FeatureSpec("n_duplicates", COUNT, 15.0),
    FeatureSpec("avg_aspath_len", STATISTIC, 1.5, 1.5, role="path_length"),
    FeatureSpec("max_aspath_len", STATISTIC, 3.0, 3.0, role="path_length"),
    FeatureSpec("avg_edit_distance", STATISTIC, 0.8, 1.0, role="edit_distance"),
    FeatureSpec("max_edit_distance", STATISTIC, 2.0, 2.0, role="edit_distance"),
)
DEFAULT_DIURNAL_AMPLITUDE = 0.9


@dataclass(frozen=True)
class BenignModel:
    features: tuple[FeatureSpec, ...] = DEFAULT_FEATURES
    diurnal_amplitude: float = DEFAULT_DIURNAL_AMPLITUDE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise InvalidInputError("benign model needs at least one feature")
        if not 0.0 <= self.diurnal_amplitude < 1.0:
            raise InvalidInputError("diurnal_amplitude must lie in [0, 1)")

    @property
    def schema(self) -> FeatureSchema:
        return FeatureSchema(tuple(f.name for f in self.features))

    def indices(self, kind: str | None = None, role: str | None = None) -> list[int]:
        return [
            i
            for i, f in enumerate(self.features)
            if (kind is None or f.kind == kind) and (role is None or f.role == role)
        ]

    def rates(self, bins: np.ndarray) -> np.ndarray:
        """Per-bin Poisson rate for each count feature, shape ``(len(bins), n_count)``."""
        lam = np.array([self.features[i].mean for i in self.indices(COUNT)])
        cycle = 1.0 + self.diurnal_amplitude * np.sin(2.0 * np.pi * np.asarray(bins) / DAY_BINS)
        return cycle[:, None] * lam[None, :]


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    start_bin: int
    duration_bins: int
    intensity: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise InvalidInputError(f"unknown scenario kind {self.kind!r}")
        if self.start_bin < 0 or self.duration_bins < 1:
            raise InvalidInputError("scenario needs start_bin >= 0 and duration_bins >= 1")
        if self.intensity is None:
            object.__setattr__(self, "intensity", DEFAULT_INTENSITY[self.kind])
        if not self.intensity > 0:
            raise InvalidInputError("intensity must be positive")


def _check_schema(model: BenignModel, schema: FeatureSchema | None) -> FeatureSchema:
    if schema is None:
        return model.schema
    if schema.feature_names != model.schema.feature_names:
        raise InvalidInputError(
            f"schema {schema.feature_names} does not match model features "
            f"{model.schema.feature_names}"
        )
    return schema


def _draw_benign(model: BenignModel, bins: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((len(bins), len(model.features)))
    count_idx = model.indices(COUNT)
    if count_idx:
        out[:, count_idx] = rng.poisson(model.rates(bins))
    stat_idx = model.indices(STATISTIC)
    if stat_idx:
        mu = np.array([model.features[i].mean for i in stat_idx])
        sd = np.array([model.features[i].std for i in stat_idx])
        out[:, stat_idx] = np.maximum(rng.normal(mu, sd, size=(len(bins), len(stat_idx))), 0.0)
    return out


def generate_benign(
    model: BenignModel, length: int, schema: FeatureSchema | None = None, start_bin: int = 0
) -> FeatureSeries:
    """Draw ``length`` benign bins from ``model``; identical inputs give identical output."""
    if length <= 0:
        raise InvalidInputError("length must be positive")
    schema = _check_schema(model, schema)
    rng = np.random.default_rng(model.seed)
    bins = np.arange(start_bin, start_bin + length)
    values = _draw_benign(model, bins, rng)
    # all-zero bins are reserved for signal loss
    for _ in range(1000):
        dead = np.flatnonzero(~values.any(axis=1))
        if dead.size == 0:
            break
        values[dead] = _draw_benign(model, bins[dead], rng)
    else:
        raise InvalidInputError("benign model keeps producing all-zero bins; raise its rates")
    return FeatureSeries(schema, values, np.zeros(length, dtype=np.int8), bins)


def inject_scenario(base: FeatureSeries, spec: ScenarioSpec, model: BenignModel) -> FeatureSeries:
    """Rewrite ``spec``'s window of a benign series with one anomaly signature.

    Records inside ``[start_bin, start_bin + duration_bins)`` (positions in
    ``base``) are relabeled anomalous; everything else is returned untouched.
    """
    if not base.is_benign():
        raise InvalidInputError("scenarios are injected into all-benign series only")
    _check_schema(model, base.schema)
    lo, hi = spec.start_bin, spec.start_bin + spec.duration_bins
    if hi > len(base):
        raise InvalidInputError(
            f"scenario window [{lo}, {hi}) overflows series of length {len(base)}"
        )
    rng = np.random.default_rng(spec.seed)
    values = np.array(base.values)
    labels = np.array(base.labels)
    window = values[lo:hi]
    bins = base.bin_index[lo:hi]
    count_idx = model.indices(COUNT)

    if spec.kind == "signal_loss":
        window[:] = 0.0
    elif spec.kind == "storm":
        if count_idx:
            mean = model.rates(bins) * spec.intensity
            # negative binomial with p=1/2 has variance twice its mean
            window[:, count_idx] = rng.negative_binomial(mean, 0.5)
        for i in model.indices(role="path_length"):
            window[:, i] += rng.uniform(10.0, 30.0, size=len(bins))
        for i in model.indices(role="edit_distance"):
            window[:, i] *= 5.0
    else:  # low_deviation
        targets = count_idx[:2]
        if len(targets) < 2:
            raise InvalidInputError("low_deviation needs at least two count features")
        rate = model.rates(bins)[:, :2] * (1.0 + 0.2 * spec.intensity)
        window[:, targets] = rng.poisson(rate)

    labels[lo:hi] = ANOMALOUS
    return base.replace(values=values, labels=labels)


@dataclass(frozen=True)
class SuiteConfig:
    """Parameters for :func:`make_scenario_suite`.

    ``scenario_seed`` drives the injectors; when omitted it is derived from
    ``seed``.
    """

    model: BenignModel = field(default_factory=BenignModel)
    train_length: int = 7200
    test_length: int = 2880
    anomaly_length: int = 2880
    intensity: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_INTENSITY))
    seed: int = 7
    scenario_seed: int | None = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SuiteConfig":
        """Build from the JSON suite-config document.

        Keys: ``schema`` (feature names), ``lambda`` (name -> rate or mean),
        ``sigma`` (name -> std; a feature listed here is a statistic),
        ``roles`` (``{"path_length": [...], "edit_distance": [...]}``),
        ``diurnal_amplitude``, ``lengths`` (``train``/``test``/``anomaly``),
        ``scenario`` (``seed`` and per-kind ``intensity``) and ``seed``.
        Missing keys fall back to the defaults.
        """
        known = {"schema", "lambda", "sigma", "roles", "diurnal_amplitude", "lengths", "scenario", "seed"}
        unknown = set(doc) - known
        if unknown:
            raise InvalidInputError(f"unknown suite config keys: {sorted(unknown)}")
        base = cls()
        features = base.model.features
        if "schema" in doc or "lambda" in doc or "sigma" in doc or "roles" in doc:
            defaults = {f.name: f for f in DEFAULT_FEATURES}
            names = list(doc.get("schema", [f.name for f in features]))
            lam = dict(doc.get("lambda", {}))
            sigma = dict(doc.get("sigma", {}))
            roles_doc = doc.get("roles")
            role_of: dict[str, str] = {}
            if roles_doc is not None:
                for role, members in roles_doc.items():
                    for name in members:
                        role_of[name] = role
            specs = []
            for name in names:
                d = defaults.get(name)
                if name in lam or name in sigma:
                    kind = STATISTIC if name in sigma else COUNT
                    mean = lam.get(name, d.mean if d else None)
                    if mean is None:
                        raise InvalidInputError(f"feature {name!r} has sigma but no lambda/mean")
                    std = float(sigma.get(name, 0.0))
                elif d is not None:
                    kind, mean, std = d.kind, d.mean, d.std
                else:
                    raise InvalidInputError(f"feature {name!r} needs a 'lambda' entry")
                role = role_of.get(name) if roles_doc is not None else (d.role if d else None)
                specs.append(FeatureSpec(name, kind, float(mean), std, role))
            for key in (lam, sigma, role_of):
                stray = set(key) - set(names)
                if stray:
                    raise InvalidInputError(f"config mentions features outside the schema: {sorted(stray)}")
            features = tuple(specs)
        seed = int(doc.get("seed", base.seed))
        model = BenignModel(
            features, float(doc.get("diurnal_amplitude", base.model.diurnal_amplitude)), seed
        )
        lengths = dict(doc.get("lengths", {}))
        scenario = dict(doc.get("scenario", {}))
        intensity = dict(DEFAULT_INTENSITY)
        intensity.update({k: float(v) for k, v in scenario.get("intensity", {}).items()})
        if set(intensity) - set(SCENARIO_KINDS):
            raise InvalidInputError(f"unknown scenario kinds in intensity: {sorted(set(intensity) - set(SCENARIO_KINDS))}")
        return cls(
            model=model,
            train_length=int(lengths.get("train", base.train_length)),
            test_length=int(lengths.get("test", base.test_length)),
            anomaly_length=int(lengths.get("anomaly", base.anomaly_length)),
            intensity=intensity,
            seed=seed,
            scenario_seed=None if scenario.get("seed") is None else int(scenario["seed"]),
        )

    def to_dict(self) -> dict[str, Any]:
        feats = self.model.features
        return {
            "schema": [f.name for f in feats],
            "lambda": {f.name: f.mean for f in feats},
            "sigma": {f.name: f.std for f in feats if f.kind == STATISTIC},
            "roles": {
                role: [f.name for f in feats if f.role == role]
                for role in ("path_length", "edit_distance")
            },
            "diurnal_amplitude": self.model.diurnal_amplitude,
            "lengths": {
                "train": self.train_length,
                "test": self.test_length,
                "anomaly": self.anomaly_length,
            },
            "scenario": {"seed": self.scenario_seed, "intensity": dict(self.intensity)},
            "seed": self.seed,
        }

    def with_seed(self, seed: int) -> "SuiteConfig":
        """Reseed every random stream (benign draws and injectors)."""
        return replace(self, seed=seed, scenario_seed=None, model=replace(self.model, seed=seed))


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)]


def make_scenario_suite(config: SuiteConfig | None = None) -> dict[str, FeatureSeries]:
    """Generate the five-series suite.

    Returns
    -------
    dict
        ``benign_train``, ``benign_test``, ``storm``, ``signal_loss`` and
        ``low_deviation``.  Each anomalous series carries one centred window
        covering 20% of its length.
    """
    config = config or SuiteConfig()
    for name, n in (("train", config.train_length), ("test", config.test_length), ("anomaly", config.anomaly_length)):
        if n <= 0:
            raise InvalidInputError(f"{name} length must be positive")
    benign_seeds = _child_seeds(config.seed, 5)
    if config.scenario_seed is None:
        inject_seeds = _child_seeds(config.seed + 1, 3)
    else:
        inject_seeds = _child_seeds(config.scenario_seed, 3)
    model = config.model

    suite = {
        "benign_train": generate_benign(replace(model, seed=benign_seeds[0]), config.train_length),
        "benign_test": generate_benign(replace(model, seed=benign_seeds[1]), config.test_length),
    }
    n = config.anomaly_length
    start, duration = suite_window(config)
    for k, kind in enumerate(SCENARIO_KINDS):
        base = generate_benign(replace(model, seed=benign_seeds[2 + k]), n)
        spec = ScenarioSpec(kind, start, duration, config.intensity.get(kind), inject_seeds[k])
        suite[kind] = inject_scenario(base, spec, model)
    return suite


def suite_window(config: SuiteConfig) -> tuple[int, int]:
    """``(start_bin, duration_bins)`` of the injected window in each anomalous series."""
    n = config.anomaly_length
    duration = max(1, round(0.2 * n))
    return (n - duration) // 2, duration


__all__ = [
    "BenignModel",
    "FeatureSpec",
    "ScenarioSpec",
    "SuiteConfig",
    "generate_benign",
    "inject_scenario",
    "make_scenario_suite",
    "suite_window",
    "COUNT",
    "STATISTIC",
    "SCENARIO_KINDS",
    "BENIGN",
    "ANOMALOUS",
]
