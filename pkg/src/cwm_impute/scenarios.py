"""Simulation designs, missingness mechanisms and the Old Faithful data."""

import csv
import hashlib
import io
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import expit

from .distributions import chol, sample_categorical_rows
from .exceptions import DataIntegrityError, ValidationError
from .io import read_json
from .model import MissingDataset

FAITHFUL_SHA256 = "d40b983752ab7ec0b15b740089c3ca7b7b59d0c7433a029a1714d134de1e8d14"

RULE_KINDS = ("mcar_by_cluster", "mnar_threshold", "mnar_logistic", "censor")


@dataclass
class MixtureSpec:
    """Gaussian mixture over ``(x_1, ..., x_d, y)`` with the response last."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    n: int
    column_names: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float)
        G, p = self.means.shape
        if self.weights.shape != (G,) or np.any(self.weights < 0) \
                or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValidationError("weights must be a probability vector with one entry per mean")
        if self.covariances.shape != (G, p, p):
            raise ValidationError("covariances must have shape (G, p, p)")
        for s in self.covariances:
            chol(s)
        if int(self.n) < 1:
            raise ValidationError("n must be positive")
        if not self.column_names:
            self.column_names = [f"x{j + 1}" for j in range(p - 1)] + ["y"]
        if len(self.column_names) != p:
            raise ValidationError("column_names must have one entry per dimension")

    @property
    def p(self):
        return self.means.shape[1]

    def y_marginal(self):
        """Weights, means and variances of the response's marginal mixture."""
        return self.weights.copy(), self.means[:, -1].copy(), self.covariances[:, -1, -1].copy()

    def to_dict(self):
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "covariances": self.covariances.tolist(), "n": int(self.n),
                "column_names": list(self.column_names)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["means"], d["covariances"], int(d["n"]),
                   list(d.get("column_names", [])))


@dataclass
class MissingnessRule:
    """Which responses to hide.

    ``kind`` selects the mechanism and ``params`` holds its constants:

    * ``mcar_by_cluster``: ``rates`` (one per true cluster);
    * ``mnar_threshold``: ``variable``, ``cutoff``, ``rate`` - each row whose
      variable exceeds the cutoff is hidden with probability ``rate``;
    * ``mnar_logistic``: ``beta0``, ``beta1`` - hidden with probability
      ``expit(beta0 + beta1 * y)``;
    * ``censor``: ``variable``, ``cutoff``, ``cluster`` (1-based) - every row
      of that cluster whose variable exceeds the cutoff is hidden.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValidationError(f"unknown missingness rule {self.kind!r}")
        p = self.params
        probs = []
        if self.kind == "mcar_by_cluster":
            probs = list(p["rates"])
        elif self.kind == "mnar_threshold":
            probs = [p["rate"]]
        for r in probs:
            if not 0.0 <= float(r) <= 1.0:
                raise ValidationError("missingness rates must lie in [0, 1]")

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], dict(d.get("params", {})))


def gen_mixture_dataset(spec, rng):
    """Draw ``spec.n`` complete rows; returns ``(dataset, labels)`` with 0-based labels."""
    labels = sample_categorical_rows(np.tile(spec.weights, (spec.n, 1)), rng)
    z = rng.standard_normal((spec.n, spec.p))
    w = np.empty((spec.n, spec.p))
    for g in range(spec.weights.shape[0]):
        idx = labels == g
        w[idx] = spec.means[g] + z[idx] @ chol(spec.covariances[g]).T
    data = MissingDataset(w[:, :-1], w[:, -1], np.zeros(spec.n, dtype=bool),
                          list(spec.column_names))
    return data, labels


def _column(dataset, name):
    names = dataset.column_names
    if name not in names:
        raise ValidationError(f"rule references unknown variable {name!r}")
    j = names.index(name)
    return dataset.y if j == len(names) - 1 else dataset.X[:, j]


def apply_missingness(dataset, true_labels, rule, rng):
    """Return a copy of ``dataset`` whose response is hidden according to ``rule``.

    Only ``y`` is ever masked; hidden entries become NaN.
    """
    if np.any(dataset.mask):
        raise ValidationError("apply_missingness expects a complete dataset")
    n = dataset.n
    p = rule.params
    u = rng.random(n)
    if rule.kind == "mcar_by_cluster":
        if true_labels is None:
            raise ValidationError("mcar_by_cluster needs the true cluster labels")
        rates = np.asarray(p["rates"], dtype=float)
        labels = np.asarray(true_labels, dtype=int)
        if labels.max() >= rates.shape[0]:
            raise ValidationError("rule has fewer rates than there are clusters")
        mask = u < rates[labels]
    elif rule.kind == "mnar_threshold":
        v = _column(dataset, p["variable"])
        mask = (v > float(p["cutoff"])) & (u < float(p["rate"]))
    elif rule.kind == "mnar_logistic":
        theta = expit(float(p["beta0"]) + float(p["beta1"]) * dataset.y)
        mask = u < theta
    else:
        if true_labels is None:
            raise ValidationError("censor needs the true cluster labels")
        cluster = int(p["cluster"]) - 1
        labels = np.asarray(true_labels, dtype=int)
        if cluster < 0 or cluster > labels.max():
            raise ValidationError(f"rule references absent cluster {p['cluster']}")
        v = _column(dataset, p["variable"])
        mask = (v > float(p["cutoff"])) & (labels == cluster)
    y = dataset.y.copy()
    y[mask] = np.nan
    return MissingDataset(dataset.X.copy(), y, mask, list(dataset.column_names))


def missing_probabilities(dataset, true_labels, rule):
    """Per-row probability that ``rule`` hides the response (for expectation checks)."""
    p = rule.params
    if rule.kind == "mcar_by_cluster":
        return np.asarray(p["rates"], dtype=float)[np.asarray(true_labels, dtype=int)]
    if rule.kind == "mnar_threshold":
        return np.where(_column(dataset, p["variable"]) > float(p["cutoff"]), float(p["rate"]), 0.0)
    if rule.kind == "mnar_logistic":
        return expit(float(p["beta0"]) + float(p["beta1"]) * dataset.y)
    hit = (_column(dataset, p["variable"]) > float(p["cutoff"])) \
        & (np.asarray(true_labels) == int(p["cluster"]) - 1)
    return hit.astype(float)


def load_faithful():
    """The 272 Old Faithful eruptions: ``waiting`` (covariate), ``eruptions`` (response)."""
    raw = resources.files("cwm_impute").joinpath("data/faithful.csv").read_bytes()
    if hashlib.sha256(raw).hexdigest() != FAITHFUL_SHA256:
        raise DataIntegrityError("bundled faithful.csv failed its checksum")
    rows = list(csv.DictReader(io.StringIO(raw.decode("ascii"))))
    eruptions = np.array([float(r["eruptions"]) for r in rows])
    waiting = np.array([float(r["waiting"]) for r in rows])
    return MissingDataset(waiting[:, None], eruptions, np.zeros(len(rows), dtype=bool),
                          ["waiting", "eruptions"])


# ---------------------------------------------------------------------------
# Built-in configurations
# ---------------------------------------------------------------------------

_SIGMA_1 = [[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]]
_SIGMA_2 = [[1.0, 0.5, -0.5], [0.5, 1.0, -0.5], [-0.5, -0.5, 1.0]]

SIMULATION_SPEC = dict(weights=[0.6, 0.4], means=[[1.0, 9.0, 7.0], [1.0, 3.0, 3.0]],
                  covariances=[_SIGMA_1, _SIGMA_2], n=1000, column_names=["x1", "x2", "y"])

CENSORED_SPEC = dict(weights=[0.6, 0.4], means=[[4.0, 10.0], [7.0, 4.0]],
                     covariances=[[[0.5, 0.35], [0.35, 0.5]], [[0.5, -0.64], [-0.64, 1.0]]],
                     n=1000, column_names=["x1", "y"])

BUILTIN_SCENARIOS = {
    "paper-mar": (SIMULATION_SPEC, MissingnessRule("mcar_by_cluster", {"rates": [0.5, 0.1]})),
    "paper-mnar-threshold": (SIMULATION_SPEC, MissingnessRule(
        "mnar_threshold", {"variable": "y", "cutoff": 6.5, "rate": 0.2})),
    "paper-censored": (CENSORED_SPEC, MissingnessRule(
        "censor", {"variable": "x1", "cutoff": 5.0, "cluster": 2})),
    "faithful-mnar": ("faithful", MissingnessRule("mnar_logistic", {"beta0": -4.23, "beta1": 1.02})),
}


def builtin_scenario(name):
    """Return ``(MixtureSpec or "faithful", MissingnessRule)`` for a named configuration."""
    try:
        spec, rule = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ValidationError(f"unknown scenario {name!r}; choose from "
                              f"{', '.join(sorted(BUILTIN_SCENARIOS))}") from None
    if spec != "faithful":
        spec = MixtureSpec(**spec)
    return spec, MissingnessRule(rule.kind, dict(rule.params))


def load_scenario_file(path):
    """Read ``{"spec": {...MixtureSpec...}, "rule": {...MissingnessRule...}}`` from JSON."""
    d = read_json(path)
    try:
        spec = "faithful" if d["spec"] == "faithful" else MixtureSpec.from_dict(d["spec"])
        rule = MissingnessRule.from_dict(d["rule"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed scenario file ({exc})") from exc
    return spec, rule


def simulate(spec, rule, rng):
    """Generate complete data and apply the rule.

    Returns ``(complete, incomplete, labels)``; ``labels`` is None for Faithful.
    """
    if isinstance(spec, str):
        if spec != "faithful":
            raise ValidationError(f"unknown data source {spec!r}")
        complete, labels = load_faithful(), None
    else:
        complete, labels = gen_mixture_dataset(spec, rng)
    return complete, apply_missingness(complete, labels, rule, rng), labels
