"""GLVQ / GMLVQ prototype classifiers.

Distances are d(w, x) = (x - w)^T Omega^T Omega (x - w). Training minimizes
the summed relative distance difference (d+ - d-) / (d+ + d-) by stochastic
gradient descent, where d+ (d-) is the distance to the closest prototype with
the correct (a wrong) label. After every step Omega is projected onto the
orthogonal complement of the frozen directions and rescaled to unit trace of
Lambda = Omega^T Omega.

GLVQ is GMLVQ with Omega held at I / sqrt(N).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import AllRelevanceRemoved, DataError, DegenerateDistance, EmptyClass, ShapeMismatch
from .linalg import check_directions
from .seeding import stream

MODEL_FORMAT = "irmalvq.model"
MODEL_VERSION = 1

GLVQ = "glvq"
GMLVQ = "gmlvq"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    step_prototype: float = 0.1
    step_omega: float = 0.01
    prototypes_per_class: int = 1
    seed: int = 0
    mode: str = GMLVQ
    # "constant", "exponential" (times step_decay per epoch) or
    # "harmonic" (initial step / (1 + epoch / epochs))
    step_schedule: str = "harmonic"
    step_decay: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.step_prototype <= 0 or self.step_omega <= 0:
            raise ValueError("step sizes must be positive")
        if self.prototypes_per_class < 1:
            raise ValueError("prototypes_per_class must be >= 1")
        if self.mode not in (GLVQ, GMLVQ):
            raise ValueError(f"mode must be {GLVQ!r} or {GMLVQ!r}")
        if self.step_schedule not in ("constant", "exponential", "harmonic"):
            raise ValueError(f"unknown step_schedule {self.step_schedule!r}")
        if not 0 < self.step_decay <= 1:
            raise ValueError("step_decay must lie in (0, 1]")

    def step_scale(self, epoch: int) -> float:
        """Factor applied to both initial step sizes during ``epoch`` (0-based)."""
        if self.step_schedule == "exponential":
            return self.step_decay ** epoch
        if self.step_schedule == "harmonic":
            return 1.0 / (1.0 + epoch / self.epochs)
        return 1.0


@dataclass(frozen=True, eq=False)
class GmlvqModel:
    prototypes: np.ndarray
    prototype_labels: np.ndarray
    omega: np.ndarray
    frozen_directions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    mode: str = GMLVQ
    config: TrainConfig | None = None
    n_classes: int = 0
    cost_history: tuple = ()

    def __post_init__(self):
        w = np.array(self.prototypes, dtype=float)
        labels = np.asarray(self.prototype_labels, dtype=np.int64)
        om = np.array(self.omega, dtype=float)
        n = w.shape[1]
        if om.shape != (n, n):
            raise ShapeMismatch(f"omega must be {n}x{n}, got {om.shape}")
        if labels.shape != (w.shape[0],):
            raise ShapeMismatch("one label per prototype required")
        frozen = np.asarray(self.frozen_directions, dtype=float)
        frozen = frozen.reshape(-1, n) if frozen.size else np.zeros((0, n))
        for a in (w, labels, om, frozen):
            a.setflags(write=False)
        object.__setattr__(self, "prototypes", w)
        object.__setattr__(self, "prototype_labels", labels)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "frozen_directions", frozen)
        object.__setattr__(self, "n_classes", self.n_classes or int(labels.max()))
        object.__setattr__(self, "cost_history", tuple(self.cost_history))

    @property
    def n_features(self) -> int:
        return self.prototypes.shape[1]

    @property
    def relevance_matrix(self) -> np.ndarray:
        return self.omega.T @ self.omega

    def distances(self, X) -> np.ndarray:
        """(P, M) matrix of adaptive squared distances."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeMismatch(f"samples have {X.shape[1]} features, model expects {self.n_features}")
        diff = X[:, None, :] - self.prototypes[None, :, :]
        proj = diff @ self.omega.T
        return np.einsum("pmk,pmk->pm", proj, proj)

    def predict(self, X) -> np.ndarray:
        # argmin returns the first minimum, i.e. the lowest prototype index on ties
        return self.prototype_labels[np.argmin(self.distances(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "mode": self.mode,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "prototypes": self.prototypes.tolist(),
            "prototype_labels": self.prototype_labels.tolist(),
            "omega": self.omega.reshape(-1).tolist(),
            "frozen_directions": self.frozen_directions.tolist(),
            "config": asdict(self.config) if self.config else None,
            "cost_history": list(self.cost_history),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GmlvqModel":
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError(f"not a version-{MODEL_VERSION} model document")
        n = int(doc["n_features"])
        frozen = np.array(doc["frozen_directions"], dtype=float).reshape(-1, n)
        return cls(
            prototypes=np.array(doc["prototypes"], dtype=float).reshape(-1, n),
            prototype_labels=np.array(doc["prototype_labels"], dtype=np.int64),
            omega=np.array(doc["omega"], dtype=float).reshape(n, n),
            frozen_directions=frozen,
            mode=doc["mode"],
            config=TrainConfig(**doc["config"]) if doc.get("config") else None,
            n_classes=int(doc["n_classes"]),
            cost_history=tuple(doc.get("cost_history", ())),
        )

    def to_json(self) -> str:
        # json writes floats with repr(), the shortest string that round-trips
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GmlvqModel":
        return cls.from_dict(json.loads(text))


def _as_vector(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise ShapeMismatch(f"vector has dimension {v.shape[0]}, expected {n}")
    return v


def distance(model: GmlvqModel, w, x) -> float:
    n = model.n_features
    z = model.omega @ (_as_vector(x, n) - _as_vector(w, n))
    return float(z @ z)


def _closest(d: np.ndarray, proto_labels: np.ndarray, y: np.ndarray):
    """Indices and distances of closest correct / closest wrong prototypes per row."""
    correct = proto_labels[None, :] == y[:, None]
    d_plus = np.where(correct, d, np.inf)
    d_minus = np.where(correct, np.inf, d)
    jp = np.argmin(d_plus, axis=1)
    jm = np.argmin(d_minus, axis=1)
    rows = np.arange(d.shape[0])
    return jp, jm, d_plus[rows, jp], d_minus[rows, jm]


def _check_coverage(model: GmlvqModel, data: Dataset):
    if data.n_features != model.n_features:
        raise ShapeMismatch(f"data has {data.n_features} features, model expects {model.n_features}")
    present = set(model.prototype_labels.tolist())
    if any(c not in present for c in np.unique(data.y).tolist()):
        raise DataError("some class in the data has no prototype")
    if len(present) < 2:
        raise DataError("need prototypes of at least two classes")


def cost_terms(model: GmlvqModel, data: Dataset) -> np.ndarray:
    """Per-sample (d+ - d-) / (d+ + d-)."""
    _check_coverage(model, data)
    _, _, dp, dm = _closest(model.distances(data.X), model.prototype_labels, data.y)
    total = dp + dm
    if np.any(total == 0):
        raise DegenerateDistance(f"sample {int(np.flatnonzero(total == 0)[0])} has d+ + d- = 0")
    return (dp - dm) / total


def cost(model: GmlvqModel, data: Dataset) -> float:
    return float(np.sum(cost_terms(model, data)))


def sample_gradient(model: GmlvqModel, x, label: int):
    """Gradient of one sample's cost term.

    Returns ``(grad_prototypes, grad_omega)`` with shapes (M, N) and (N, N);
    only the rows of the closest correct and closest wrong prototypes are
    non-zero. ``grad_omega`` is zero in GLVQ mode.
    """
    x = _as_vector(x, model.n_features)
    grad_w = np.empty_like(model.prototypes)
    grad_omega = np.empty_like(model.omega)
    status, _, _ = _kernels.gradient(
        model.prototypes, model.prototype_labels, model.omega, x, int(label),
        model.mode == GMLVQ, grad_w, grad_omega,
    )
    if status == _kernels.DEGENERATE:
        raise DegenerateDistance("d+ + d- = 0")
    return grad_w, grad_omega


def _constrain(omega, frozen) -> np.ndarray:
    """Project out the frozen directions, then rescale to trace(Lambda) = 1."""
    omega = np.array(omega, dtype=float, order="C")
    if _kernels.constrain(omega, np.ascontiguousarray(frozen, dtype=float)) == _kernels.VANISHED:
        raise AllRelevanceRemoved("Omega vanishes in the remaining subspace")
    return omega


def sgd_step(model: GmlvqModel, x, label: int, config: TrainConfig) -> GmlvqModel:
    """Return the model after one stochastic update on ``(x, label)``.

    Prototypes and Omega are both updated from the pre-step distances; Omega
    is then deflated and renormalized. A sample with d+ + d- = 0 is skipped
    with a warning.
    """
    x = _as_vector(x, model.n_features)
    w = model.prototypes.copy()
    omega = model.omega.copy()
    status = _kernels.step(
        w, model.prototype_labels, omega, model.frozen_directions, x, int(label),
        config.step_prototype, config.step_omega, model.mode == GMLVQ,
        np.empty_like(w), np.empty_like(w), np.empty_like(w),
    )
    if status == _kernels.DEGENERATE:
        warnings.warn("skipping sample with d+ + d- = 0", RuntimeWarning, stacklevel=2)
        return model
    if status == _kernels.VANISHED:
        raise AllRelevanceRemoved("Omega vanishes in the remaining subspace")
    if model.mode == GMLVQ:
        omega = _constrain(omega, model.frozen_directions)
    return replace(model, prototypes=w, omega=omega)


def init_model(data: Dataset, config: TrainConfig, frozen_directions=None) -> GmlvqModel:
    """Prototypes at the class means and Omega = I / sqrt(N), deflated.

    With several prototypes per class each copy gets N(0, 1e-4^2) jitter
    from the seeded ``jitter`` stream.
    """
    n = data.n_features
    frozen = check_directions(frozen_directions, n)
    k = config.prototypes_per_class
    protos, labels = [], []
    for c in range(1, data.n_classes + 1):
        members = data.X[data.y == c]
        if members.shape[0] == 0:
            raise EmptyClass(f"class {data.class_names[c - 1]!r} has no samples")
        protos.append(np.repeat(members.mean(axis=0)[None, :], k, axis=0))
        labels.extend([c] * k)
    w = np.vstack(protos)
    if k > 1:
        w = w + 1e-4 * stream(config.seed, "jitter").standard_normal(w.shape)
    omega = np.eye(n) / np.sqrt(n)
    if config.mode == GMLVQ:
        omega = _constrain(omega, frozen)
    elif frozen.shape[0]:
        raise DataError("GLVQ mode does not support frozen directions")
    return GmlvqModel(w, np.array(labels), omega, frozen, config.mode, config, data.n_classes)


def _tolerant_cost(w, proto_labels, omega, X, y):
    diff = X[:, None, :] - w[None, :, :]
    proj = diff @ omega.T
    d = np.einsum("pmk,pmk->pm", proj, proj)
    _, _, dp, dm = _closest(d, proto_labels, y)
    s = dp + dm
    ok = s > 0
    return float(np.sum((dp[ok] - dm[ok]) / s[ok]))


def train(data: Dataset, config: TrainConfig, frozen_directions=None) -> GmlvqModel:
    """Train for ``config.epochs`` passes over a freshly shuffled order each epoch.

    ``cost_history[e]`` is the training cost after ``e`` epochs.
    """
    model = init_model(data, config, frozen_directions)
    _check_coverage(model, data)
    learn_omega = config.mode == GMLVQ
    w = model.prototypes.copy()
    omega = model.omega.copy()
    labels = model.prototype_labels
    frozen = model.frozen_directions
    X = np.ascontiguousarray(data.X)
    y = np.ascontiguousarray(data.y)
    rng = stream(config.seed, "shuffle")
    history = [_tolerant_cost(w, labels, omega, X, y)]
    skipped = 0
    for e in range(config.epochs):
        scale = config.step_scale(e)
        status, n_skip = _kernels.epoch(
            w, labels, omega, frozen, X, y, rng.permutation(X.shape[0]),
            config.step_prototype * scale, config.step_omega * scale, learn_omega,
        )
        skipped += n_skip
        if status == _kernels.VANISHED:
            raise AllRelevanceRemoved("Omega vanished during training")
        history.append(_tolerant_cost(w, labels, omega, X, y))
    if skipped:
        warnings.warn(f"skipped {skipped} updates with d+ + d- = 0", RuntimeWarning, stacklevel=2)
    return replace(model, prototypes=w, omega=omega, cost_history=tuple(history))


def predict(model: GmlvqModel, x) -> int:
    return int(model.predict(_as_vector(x, model.n_features)[None, :])[0])
