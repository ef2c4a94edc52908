"""Repeated stratified hold-out validation and the reduced-space GLVQ pipelines.

Each pipeline takes standardized train/test sets and returns the test
confusion matrix (and, for the reduced spaces, the retained dimension):

* ``original``     GLVQ in the full feature space.
* ``gmlvq_space``  GLVQ on the leading eigenvectors of a GMLVQ relevance
  matrix that carry 99% of its eigenvalue mass.
* ``irma_space``   GLVQ on the IRMA subspace learned from the training set.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from . import irma, lvq
from .data import Dataset, SplitSpec, stratified_split
from .linalg import sym_eig
from .metrics import balanced_accuracy, confusion_matrix
from .seeding import derive_seed

PIPELINES = ("original", "gmlvq_space", "irma_space")
EIGENVALUE_MASS = 0.99
SELECT_TRAIN_BAC = "train_bac"
SELECT_STOPPING_RULE = "stopping_rule"


@dataclass(frozen=True, eq=False)
class EvalReport:
    pipeline: str
    prototypes_per_class: int
    bacs: tuple
    dims: tuple = ()
    dataset: str = ""
    mean: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self):
        bacs = np.asarray(self.bacs, dtype=float)
        object.__setattr__(self, "bacs", tuple(bacs.tolist()))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "mean", float(bacs.mean()) if bacs.size else float("nan"))
        object.__setattr__(self, "std", float(bacs.std(ddof=1)) if bacs.size > 1 else 0.0)

    @property
    def repeats(self) -> int:
        return len(self.bacs)

    @property
    def dim_mode(self) -> int | None:
        """Most frequent retained dimension; the smallest one on ties."""
        if not self.dims:
            return None
        values, counts = np.unique(self.dims, return_counts=True)
        return int(values[np.argmax(counts)])


def _score(model: lvq.GmlvqModel, test: Dataset) -> np.ndarray:
    return confusion_matrix(test.y, model.predict(test.X), test.n_classes)


def _glvq_config(config: lvq.TrainConfig, n_prototypes: int) -> lvq.TrainConfig:
    return replace(config, mode=lvq.GLVQ, prototypes_per_class=n_prototypes)


def glvq_in_subspace(train: Dataset, test: Dataset, basis: np.ndarray, n_prototypes: int,
                     config: lvq.TrainConfig) -> np.ndarray:
    """Train GLVQ on ``train @ basis.T`` and return the confusion matrix on ``test``."""
    basis = np.asarray(basis, dtype=float)
    tr = train.with_features(train.X @ basis.T)
    te = test.with_features(test.X @ basis.T)
    return _score(lvq.train(tr, _glvq_config(config, n_prototypes)), te)


def pipeline_original(train: Dataset, test: Dataset, n_prototypes: int,
                      config: lvq.TrainConfig | None = None) -> np.ndarray:
    config = config or lvq.TrainConfig()
    return _score(lvq.train(train, _glvq_config(config, n_prototypes)), test)


def leading_mass_count(eigenvalues, mass: float = EIGENVALUE_MASS) -> int:
    """Fewest leading eigenvalues whose sum reaches ``mass`` of the total."""
    ev = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    frac = np.cumsum(ev) / ev.sum()
    return int(min(np.searchsorted(frac, mass - 1e-12) + 1, ev.size))


def pipeline_gmlvq_space(train: Dataset, test: Dataset, n_prototypes: int,
                         config: lvq.TrainConfig | None = None) -> tuple[np.ndarray, int]:
    config = config or lvq.TrainConfig()
    gcfg = replace(config, mode=lvq.GMLVQ, prototypes_per_class=n_prototypes,
                   seed=derive_seed(config.seed, "gmlvq_space"))
    model = lvq.train(train, gcfg)
    lam = model.relevance_matrix
    dec = sym_eig(0.5 * (lam + lam.T))
    k = leading_mass_count(dec.eigenvalues)
    basis = dec.eigenvectors[:, :k].T
    return glvq_in_subspace(train, test, basis, n_prototypes, config), k


def pipeline_irma_space(train: Dataset, test: Dataset, n_prototypes: int, k: int = 1,
                        config: lvq.TrainConfig | None = None,
                        irma_config: irma.IrmaConfig | None = None,
                        selection: str = SELECT_TRAIN_BAC) -> tuple[np.ndarray, int]:
    """GLVQ in the IRMA subspace found on ``train``.

    IRMA runs with its stopping rule on training BAC. With ``selection =
    "train_bac"`` the retained subspace is the prefix of whole iterations
    whose GLVQ training BAC is highest (smallest prefix on ties); with
    ``"stopping_rule"`` it is the full assembled subspace.
    """
    config = config or lvq.TrainConfig()
    icfg = irma_config or irma.IrmaConfig()
    icfg = replace(
        icfg,
        vectors_per_iteration=k,
        validation=None,
        train_config=replace(config, mode=lvq.GMLVQ, prototypes_per_class=n_prototypes,
                             seed=derive_seed(config.seed, "irma_space")),
    )
    result = irma.run_irma(train, icfg)
    kept = [r for r in result.records if not r.terminal]
    if not kept:
        # nothing above chance: fall back to the first harvested direction(s)
        kept = result.records[:1]
    if selection == SELECT_TRAIN_BAC:
        best, best_bac = 1, -1.0
        for j in range(1, len(kept) + 1):
            basis = np.vstack([r.removed_vectors for r in kept[:j]])
            bac = balanced_accuracy(glvq_in_subspace(train, train, basis, n_prototypes, config))
            if bac > best_bac:
                best, best_bac = j, bac
        kept = kept[:best]
    elif selection != SELECT_STOPPING_RULE:
        raise ValueError(f"unknown subspace selection {selection!r}")
    basis = np.vstack([r.removed_vectors for r in kept])
    return glvq_in_subspace(train, test, basis, n_prototypes, config), basis.shape[0]


Runner = Callable[[Dataset, Dataset, int], object]


def repeat_seeds(split_spec: SplitSpec, repeats: int) -> list[tuple[int, int]]:
    """(split seed, model seed) per repeat, derived from the split spec's seed."""
    return [
        (derive_seed(split_spec.seed, "repeat", r, "split"), derive_seed(split_spec.seed, "repeat", r, "model"))
        for r in range(repeats)
    ]


def _one_repeat(dataset: Dataset, runner: Runner, split_spec: SplitSpec, seeds):
    split_seed, model_seed = seeds
    train, test = stratified_split(dataset, replace(split_spec, seed=split_seed))
    out = runner(train, test, model_seed)
    cm, dim = out if isinstance(out, tuple) else (out, None)
    return balanced_accuracy(cm), dim


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def repeated_validation(dataset: Dataset, runner: Runner, repeats: int, split_spec: SplitSpec,
                        pipeline: str = "custom", prototypes_per_class: int = 0,
                        jobs: int = 1, name: str = "") -> EvalReport:
    """Run ``runner(train, test, seed)`` on ``repeats`` seeded stratified splits.

    The runner returns a confusion matrix or ``(confusion matrix, dim)``.
    With ``jobs > 1`` repeats run in worker processes (the runner must be
    picklable); results are always aggregated in repeat order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    fn = partial(_one_repeat, dataset, runner, split_spec)
    results = _map(fn, repeat_seeds(split_spec, repeats), jobs)
    bacs = [b for b, _ in results]
    dims = [d for _, d in results if d is not None]
    return EvalReport(pipeline, prototypes_per_class, tuple(bacs), tuple(dims), name)


def make_runner(pipeline: str, n_prototypes: int, config: lvq.TrainConfig | None = None,
                irma_config: irma.IrmaConfig | None = None,
                selection: str = SELECT_TRAIN_BAC) -> Runner:
    config = config or lvq.TrainConfig()
    return partial(_run_pipeline, pipeline, n_prototypes, config, irma_config, selection)


def _run_pipeline(pipeline, n_prototypes, config, irma_config, selection, train, test, seed):
    cfg = replace(config, seed=seed)
    if pipeline == "original":
        return pipeline_original(train, test, n_prototypes, cfg)
    if pipeline == "gmlvq_space":
        return pipeline_gmlvq_space(train, test, n_prototypes, cfg)
    if pipeline == "irma_space":
        return pipeline_irma_space(train, test, n_prototypes, 1, cfg, irma_config, selection)
    raise ValueError(f"unknown pipeline {pipeline!r}")


def compare_pipelines(dataset: Dataset, repeats: int = 30, split_spec: SplitSpec | None = None,
                      prototype_counts=(1, 2, 3), pipelines=PIPELINES,
                      config: lvq.TrainConfig | None = None,
                      irma_config: irma.IrmaConfig | None = None,
                      jobs: int = 1, name: str = "",
                      selection: str = SELECT_TRAIN_BAC) -> list[EvalReport]:
    """Every pipeline x prototype count on the same per-repeat splits."""
    split_spec = split_spec or SplitSpec()
    reports = []
    for n_p in prototype_counts:
        for p in pipelines:
            runner = make_runner(p, n_p, config, irma_config, selection)
            reports.append(repeated_validation(dataset, runner, repeats, split_spec, p, n_p, jobs, name))
    return reports
