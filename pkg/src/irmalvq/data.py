"""Labeled datasets: loading, synthetic generation, z-scoring and splitting."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyClass, IoError, ParseError, ShapeMismatch, ZeroVariance
from .seeding import stream

WDBC_FEATURES = [
    f"{base}_{stat}"
    for stat in ("mean", "se", "worst")
    for base in (
        "radius", "texture", "perimeter", "area", "smoothness",
        "compactness", "concavity", "concave_points", "symmetry", "fractal_dimension",
    )
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """P samples in R^N with integer labels 1..C.

    ``class_names[c - 1]`` is the name of label ``c``.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = ()
    class_names: tuple = ()

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise ShapeMismatch(f"samples must form a 2-D array, got shape {X.shape}")
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ShapeMismatch(f"{X.shape[0]} samples but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ParseError("non-finite feature value")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ShapeMismatch(f"{len(names)} feature names for {X.shape[1]} features")
        n_classes = len(self.class_names) or (int(y.max()) if y.size else 0)
        classes = tuple(self.class_names) or tuple(str(c) for c in range(1, n_classes + 1))
        if y.size and (y.min() < 1 or y.max() > n_classes):
            raise ShapeMismatch(f"labels must lie in 1..{n_classes}")
        counts = np.bincount(y, minlength=n_classes + 1)[1:]
        if np.any(counts == 0):
            missing = classes[int(np.flatnonzero(counts == 0)[0])]
            raise EmptyClass(f"class {missing!r} has no samples")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", classes)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes + 1)[1:]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_names)

    def with_features(self, X, feature_names=()) -> "Dataset":
        return Dataset(X, self.y, tuple(feature_names), self.class_names)

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.X, y, self.feature_names, self.class_names)

    def to_csv(self, path) -> None:
        """Write the canonical format: feature columns then ``label`` (class name)."""
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([*self.feature_names, "label"])
                for row, label in zip(self.X, self.y):
                    w.writerow([*(repr(float(v)) for v in row), self.class_names[label - 1]])
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class Schema:
    """How to read one CSV layout.

    ``label_column`` and ``drop_columns`` are column indices (negative counts
    from the end) or, for files with a header, column names.
    """

    label_column: int | str = "label"
    drop_columns: tuple = ()
    header: bool = True
    # lines that do not parse as data before the first data row are skipped
    skip_preamble: bool = False
    feature_names: tuple = ()


SCHEMAS = {
    "canonical": Schema(),
    "wdbc": Schema(label_column=1, drop_columns=(0,), header=False, feature_names=tuple(WDBC_FEATURES)),
    "segmentation": Schema(label_column=0, header=False, skip_preamble=True),
}


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            return [[c.strip() for c in row] for row in csv.reader(fh)]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _resolve(col, header, width, path):
    if isinstance(col, str):
        if header is None or col not in header:
            raise ParseError(f"{path}: no column named {col!r}")
        return header.index(col)
    idx = col + width if col < 0 else col
    if not 0 <= idx < width:
        raise ParseError(f"{path}: column {col} out of range for {width} columns")
    return idx


def _parse_table(path, schema: Schema):
    """Return (feature matrix, label strings, feature names)."""
    rows = _read_rows(path)
    header = None
    preamble_names = None
    lineno = 0
    body = []
    width = None
    for i, row in enumerate(rows, start=1):
        if not row or all(c == "" for c in row):
            continue
        if schema.header and header is None:
            header = row
            width = len(row)
            continue
        if schema.skip_preamble and not body:
            # a preamble ends at the first row whose non-label fields are numeric
            if len(row) < 2 or not all(_is_float(c) for c in row[1:]):
                if len(row) > 1 and not any(_is_float(c) for c in row):
                    preamble_names = row
                continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise ParseError(f"{path}: expected {width} fields, got {len(row)}", row=i)
        body.append((i, row))
        lineno = i
    if not body:
        raise ParseError(f"{path}: no data rows", row=lineno or None)

    label_idx = _resolve(schema.label_column, header, width, path)
    drop = {_resolve(c, header, width, path) for c in schema.drop_columns}
    feat_idx = [j for j in range(width) if j != label_idx and j not in drop]

    if schema.feature_names:
        names = list(schema.feature_names)
    elif header is not None and len(header) == width:
        names = [header[j] for j in feat_idx]
    elif preamble_names is not None and len(preamble_names) == len(feat_idx):
        names = list(preamble_names)
    else:
        names = [f"x{k + 1}" for k in range(len(feat_idx))]
    if len(names) != len(feat_idx):
        raise ParseError(f"{path}: {len(feat_idx)} feature columns but {len(names)} names")

    values = np.empty((len(body), len(feat_idx)))
    labels = []
    for r, (lineno, row) in enumerate(body):
        for k, j in enumerate(feat_idx):
            try:
                v = float(row[j])
            except ValueError:
                raise ParseError(f"{path}: not a number: {row[j]!r}", row=lineno, column=j + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: non-finite value {row[j]!r}", row=lineno, column=j + 1)
            values[r, k] = v
        labels.append(row[label_idx])
    return values, labels, names


def _encode(labels: Sequence[str], class_names=None):
    classes = tuple(class_names) if class_names else tuple(sorted(set(labels)))
    lookup = {c: i + 1 for i, c in enumerate(classes)}
    try:
        y = np.array([lookup[s] for s in labels], dtype=np.int64)
    except KeyError as exc:
        raise ParseError(f"unknown class label {exc.args[0]!r}") from None
    return y, classes


def drop_constant_features(X: np.ndarray, names):
    """Remove columns with a single distinct value, warning about each."""
    keep = np.ptp(X, axis=0) > 0 if X.shape[0] else np.ones(X.shape[1], bool)
    for j in np.flatnonzero(~keep):
        warnings.warn(f"dropping constant feature {names[j]!r}", stacklevel=3)
    return X[:, keep], [n for n, k in zip(names, keep) if k]


def load_csv(path, label_column=None, schema_hint="canonical", class_names=None) -> Dataset:
    """Load a labeled CSV file (or several files with the same layout, merged).

    ``schema_hint`` is ``"canonical"``, ``"wdbc"``, ``"segmentation"`` or a
    :class:`Schema`. ``label_column`` overrides the schema's label column.
    Labels are re-encoded to 1..C in sorted class-name order unless
    ``class_names`` fixes the order. Constant columns are dropped.
    """
    schema = SCHEMAS[schema_hint] if isinstance(schema_hint, str) else schema_hint
    if label_column is not None:
        schema = Schema(**{**schema.__dict__, "label_column": label_column})
    paths = [path] if isinstance(path, (str, Path)) else list(path)
    if not paths:
        raise IoError("no input files")
    blocks, labels, names = [], [], None
    for p in paths:
        if not Path(p).is_file():
            raise IoError(f"no such file: {p}")
        X, lab, nm = _parse_table(p, schema)
        if names is not None and nm != names:
            raise ParseError(f"{p}: columns differ from {paths[0]}")
        names = nm
        blocks.append(X)
        labels.extend(lab)
    X = np.vstack(blocks)
    X, names = drop_constant_features(X, names)
    y, classes = _encode(labels, class_names)
    return Dataset(X, y, tuple(names), classes)


def load_wdbc(path) -> Dataset:
    return load_csv(path, schema_hint="wdbc")


def load_segmentation(*paths) -> Dataset:
    """Merge the UCI segmentation train/test files into one dataset."""
    return load_csv(list(paths), schema_hint="segmentation")


def gen_two_gaussians(n_per_class: int, seed: int) -> Dataset:
    """Two elongated Gaussian classes in (x1, x2) plus two pure-noise features.

    Class means are (-1, -8) and (1, 8) with shared covariance diag(2, 12);
    x3 and x4 are standard normal for both classes. Rows are class-ordered.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = stream(seed, "two_gaussians")
    means = np.array([[-1.0, -8.0], [1.0, 8.0]])
    sd = np.sqrt([2.0, 12.0])
    blocks = []
    for m in means:
        informative = m + rng.standard_normal((n_per_class, 2)) * sd
        noise = rng.standard_normal((n_per_class, 2))
        blocks.append(np.hstack([informative, noise]))
    y = np.repeat([1, 2], n_per_class)
    return Dataset(np.vstack(blocks), y, ("x1", "x2", "x3", "x4"), ("1", "2"))


@dataclass(frozen=True, eq=False)
class ZScoreTransform:
    means: np.ndarray
    std_devs: np.ndarray

    def apply(self, d: Dataset) -> Dataset:
        return apply_zscore(self, d)

    def inverse(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) * self.std_devs + self.means


def fit_zscore(d: Dataset) -> ZScoreTransform:
    """Per-feature mean and population standard deviation (denominator P)."""
    means = d.X.mean(axis=0)
    stds = d.X.std(axis=0)
    for j in np.flatnonzero(~(stds > 0)):
        raise ZeroVariance(d.feature_names[j])
    return ZScoreTransform(means, stds)


def apply_zscore(t: ZScoreTransform, d: Dataset) -> Dataset:
    if t.means.shape[0] != d.n_features:
        raise ShapeMismatch(f"transform has {t.means.shape[0]} features, data has {d.n_features}")
    return d.with_features((d.X - t.means) / t.std_devs, d.feature_names)


def standardize(d: Dataset) -> Dataset:
    return apply_zscore(fit_zscore(d), d)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def _n_train(fraction: float, n: int) -> int:
    return int(math.floor(fraction * n + 0.5))


def split_indices(d: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    rng = stream(spec.seed, "split")
    if not spec.stratified:
        perm = rng.permutation(d.n_samples)
        k = _n_train(spec.train_fraction, d.n_samples)
        return np.sort(perm[:k]), np.sort(perm[k:])
    train, test = [], []
    for c in range(1, d.n_classes + 1):
        members = np.flatnonzero(d.y == c)
        k = _n_train(spec.train_fraction, members.size)
        if k == 0 or k == members.size:
            raise EmptyClass(
                f"class {d.class_names[c - 1]!r} ({members.size} samples) cannot be split "
                f"at fraction {spec.train_fraction}"
            )
        perm = rng.permutation(members)
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded split with round-half-up per-class train counts."""
    tr, te = split_indices(d, spec)
    return d.subset(tr), d.subset(te)
