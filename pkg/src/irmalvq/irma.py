"""Iterated relevance matrix analysis.

Iteration 0 trains an unrestricted GMLVQ model. Every later iteration trains
GMLVQ with Omega confined to the orthogonal complement of all leading
eigenvectors harvested so far, then harvests the leading eigenvectors of its
own relevance matrix. The loop ends once a model classifies at (near) chance
level, when the iteration cap is hit, or when too few dimensions remain.
The harvested vectors of the above-chance iterations span the
class-discriminative subspace.
"""
from __future__ import annotations

import datetime as _dt
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import lvq
from .data import Dataset
from .errors import DataError, ShapeMismatch
from .linalg import orthonormal_complement, sign_normalize, sym_eig
from .metrics import balanced_accuracy, confusion_matrix
from .seeding import derive_seed

RESULT_FORMAT = "irmalvq.irma"
RESULT_VERSION = 1


@dataclass(frozen=True)
class IrmaConfig:
    vectors_per_iteration: int = 1
    # restricted iterations after iteration 0; None runs until the space is used up
    max_iterations: int | None = None
    stop_margin: float = 0.05
    train_config: lvq.TrainConfig = field(default_factory=lvq.TrainConfig)
    validation: Dataset | None = None
    # if set, harvest the fewest leading vectors whose eigenvalues sum to >= this
    eigenvalue_mass: float | None = None
    stop_at_chance: bool = True

    def __post_init__(self):
        if self.vectors_per_iteration < 1:
            raise ValueError("vectors_per_iteration must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.stop_margin < 0:
            raise ValueError("stop_margin must be >= 0")
        if self.eigenvalue_mass is not None and not 0 < self.eigenvalue_mass <= 1:
            raise ValueError("eigenvalue_mass must lie in (0, 1]")

    def check(self, n_features: int):
        k = self.vectors_per_iteration
        if k > n_features:
            raise DataError(f"cannot remove {k} vectors per iteration in {n_features} dimensions")
        if self.max_iterations is not None and k * self.max_iterations > n_features:
            raise DataError(
                f"{self.max_iterations} iterations x {k} vectors exceeds {n_features} dimensions"
            )


@dataclass(frozen=True, eq=False)
class IterationRecord:
    index: int
    model: lvq.GmlvqModel
    removed_vectors: np.ndarray
    removed_eigenvalues: np.ndarray
    bac: float
    # True for the final near-chance iteration, whose vectors are not kept
    terminal: bool = False


@dataclass(frozen=True, eq=False)
class IrmaSubspace:
    basis: np.ndarray
    source_iteration: np.ndarray
    bacs: tuple

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def to_text(self) -> str:
        """One basis vector per line, 17 significant digits."""
        return "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in self.basis)


@dataclass(frozen=True, eq=False)
class IrmaResult:
    records: list
    subspace: IrmaSubspace
    config: IrmaConfig
    # whether BACs were scored on a held-out set (kept when reloading from JSON)
    validated: bool | None = None

    def __post_init__(self):
        if self.validated is None:
            object.__setattr__(self, "validated", self.config.validation is not None)

    def __iter__(self):
        return iter((self.records, self.subspace))

    @property
    def bacs(self) -> list:
        return [r.bac for r in self.records]

    def to_dict(self, timestamp: bool = True) -> dict:
        cfg = asdict(replace(self.config, validation=None))
        cfg["validation"] = self.validated
        doc = {
            "format": RESULT_FORMAT,
            "version": RESULT_VERSION,
            "config": cfg,
            "iterations": [
                {
                    "index": r.index,
                    "bac": r.bac,
                    "terminal": r.terminal,
                    "removed_vectors": r.removed_vectors.tolist(),
                    "removed_eigenvalues": r.removed_eigenvalues.tolist(),
                    "relevance_profile": relevance_profile(r.model).tolist(),
                    "model": r.model.to_dict(),
                }
                for r in self.records
            ],
            "subspace": {
                "basis": self.subspace.basis.tolist(),
                "source_iteration": self.subspace.source_iteration.tolist(),
            },
        }
        if timestamp:
            doc["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        return doc

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "IrmaResult":
        if doc.get("format") != RESULT_FORMAT or doc.get("version") != RESULT_VERSION:
            raise DataError(f"not a version-{RESULT_VERSION} IRMA result document")
        cfg = dict(doc["config"])
        cfg["train_config"] = lvq.TrainConfig(**cfg["train_config"])
        validated = bool(cfg["validation"])
        cfg["validation"] = None
        records = []
        for it in doc["iterations"]:
            model = lvq.GmlvqModel.from_dict(it["model"])
            n = model.n_features
            records.append(IterationRecord(
                index=it["index"],
                model=model,
                removed_vectors=np.array(it["removed_vectors"], dtype=float).reshape(-1, n),
                removed_eigenvalues=np.array(it["removed_eigenvalues"], dtype=float),
                bac=it["bac"],
                terminal=it["terminal"],
            ))
        n = records[0].model.n_features if records else 0
        sub = doc["subspace"]
        subspace = IrmaSubspace(
            np.array(sub["basis"], dtype=float).reshape(-1, n),
            np.array(sub["source_iteration"], dtype=np.int64),
            tuple(r.bac for r in records),
        )
        return cls(records, subspace, IrmaConfig(**cfg), validated)

    @classmethod
    def from_json(cls, text: str) -> "IrmaResult":
        return cls.from_dict(json.loads(text))


def relevance_profile(model: lvq.GmlvqModel) -> np.ndarray:
    """Diagonal of Lambda = Omega^T Omega, i.e. squared column norms of Omega."""
    return np.sum(model.omega * model.omega, axis=0)


def harvest_vectors(model: lvq.GmlvqModel, k: int | None = None, eigenvalue_mass: float | None = None):
    """Leading eigenvectors (as rows) and eigenvalues of the model's Lambda.

    The decomposition is taken inside the orthogonal complement of the model's
    frozen directions, so the returned vectors are orthogonal to them even
    when Lambda has a degenerate (e.g. zero) tail.
    """
    n = model.n_features
    frozen = model.frozen_directions
    free = n - frozen.shape[0]
    lam = model.relevance_matrix
    if frozen.shape[0]:
        q = orthonormal_complement(frozen, n)
        dec = sym_eig(_symmetrize(q @ lam @ q.T))
        vectors = dec.eigenvectors.T @ q
        vectors = sign_normalize(vectors.T).T
    else:
        dec = sym_eig(_symmetrize(lam))
        vectors = dec.eigenvectors.T
    values = dec.eigenvalues
    if eigenvalue_mass is not None:
        k = int(np.searchsorted(np.cumsum(values), eigenvalue_mass - 1e-12) + 1)
        k = min(k, free)
    if k is None or not 1 <= k <= free:
        raise DataError(f"cannot harvest {k} vectors from a {free}-dimensional free space")
    return vectors[:k].copy(), values[:k].copy()


def _symmetrize(a):
    return 0.5 * (a + a.T)


def model_bac(model: lvq.GmlvqModel, data: Dataset) -> float:
    cm = confusion_matrix(data.y, model.predict(data.X), data.n_classes)
    return balanced_accuracy(cm)


def run_irma(data: Dataset, config: IrmaConfig) -> IrmaResult:
    n = data.n_features
    config.check(n)
    if config.validation is not None and config.validation.n_features != n:
        raise ShapeMismatch("validation set dimension differs from training data")
    scoring = config.validation if config.validation is not None else data
    threshold = 1.0 / data.n_classes + config.stop_margin
    k = config.vectors_per_iteration

    removed: list[np.ndarray] = []
    records: list[IterationRecord] = []
    i = 0
    while n - len(removed) >= (1 if config.eigenvalue_mass is not None else k):
        if config.max_iterations is not None and i > config.max_iterations:
            break
        tc = replace(config.train_config, seed=derive_seed(config.train_config.seed, "irma", i))
        frozen = np.array(removed) if removed else None
        model = lvq.train(data, tc, frozen)
        bac = model_bac(model, scoring)
        if config.eigenvalue_mass is not None:
            vecs, vals = harvest_vectors(model, eigenvalue_mass=config.eigenvalue_mass)
        else:
            vecs, vals = harvest_vectors(model, k)
        terminal = config.stop_at_chance and bac <= threshold
        records.append(IterationRecord(i, model, vecs, vals, bac, terminal))
        if terminal:
            break
        removed.extend(vecs)
        i += 1

    kept = [r for r in records if not r.terminal]
    if kept:
        basis = np.vstack([r.removed_vectors for r in kept])
        source = np.concatenate([[r.index] * r.removed_vectors.shape[0] for r in kept])
    else:
        basis = np.zeros((0, n))
        source = np.zeros(0, dtype=np.int64)
    subspace = IrmaSubspace(basis, np.asarray(source, dtype=np.int64), tuple(r.bac for r in records))
    return IrmaResult(records, subspace, config)


def project(subspace: IrmaSubspace, data: Dataset) -> Dataset:
    """Coordinates y_i = x . v_i for every basis vector, in basis order."""
    if data.n_features != subspace.basis.shape[1]:
        raise ShapeMismatch(f"data has {data.n_features} features, subspace lives in {subspace.basis.shape[1]}")
    names = []
    counts: dict[int, int] = {}
    for it in subspace.source_iteration.tolist():
        counts[it] = counts.get(it, 0) + 1
        names.append(f"it{it}_v{counts[it]}")
    return data.with_features(data.X @ subspace.basis.T, names)
