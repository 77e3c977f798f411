"""From-scratch classifiers and the stratified cross-validation harness.

Three classifiers over a trials x features matrix with string labels:

* LDA with a ridge-regularized pooled covariance (the 80-feature,
  ~120-train-row regime leaves the plain pooled estimate near singular);
* soft-margin RBF SVM trained by Platt's sequential minimal optimization
  (simplified working-pair selection), one-vs-one for multiclass;
* random forest of Gini-split trees with bootstrap sampling and
  sqrt-of-d feature subsets.

The harness runs stratified k-fold cross-validation per task (multiclass
plus the three pairwise tasks), standardizing with training-fold statistics
only so no test information leaks into the models.  All shuffling draws
from named substreams of one root seed, so reports are bit-reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._rng import derive_seed, substream

TASKS = ("multiclass", "power_vs_none", "precision_vs_none", "power_vs_precision")
BINARY_TASKS = {
    "power_vs_none": ("power", "none"),
    "precision_vs_none": ("precision", "none"),
    "power_vs_precision": ("power", "precision"),
}
CLASSIFIERS = ("rf", "svm", "lda")


class ConvergenceError(RuntimeError):
    """SMO ran out of passes; ``violation`` carries the worst KKT violation."""

    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation


# ---------------------------------------------------------------------------
# standardization and folds


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds


def fit_standardizer(X: np.ndarray) -> Standardizer:
    """Per-feature mean/std (population) from training rows only.

    Features with std <= 1e-12 keep std := 1 so constant columns pass
    through centered rather than exploding.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds <= 1e-12, 1.0, stds)
    return Standardizer(means, stds)


def stratified_kfold(labels, k: int = 5, seed: int = 0):
    """Shuffle each class and deal its indices round-robin into k folds.

    Returns k (train_indices, test_indices) pairs; folds are disjoint, cover
    everything, and per-fold class counts differ from perfect proportion by
    at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = substream(seed, "folds")
    fold_members = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise ValueError(f"class {cls!r} has {idx.size} samples, fewer than k={k}")
        idx = rng.permutation(idx)
        for j, i in enumerate(idx):
            fold_members[j % k].append(int(i))
    everything = np.arange(labels.size)
    splits = []
    for j in range(k):
        test = np.sort(np.array(fold_members[j], dtype=int))
        train = np.setdiff1d(everything, test)
        splits.append((train, test))
    return splits


# ---------------------------------------------------------------------------
# linear discriminant analysis


@dataclass
class LdaModel:
    classes: np.ndarray
    class_means: np.ndarray
    cov_factor: np.ndarray  # lower Cholesky factor of the regularized pooled covariance
    priors: np.ndarray


def lda_fit(X, y, ridge: float = 1e-4) -> LdaModel:
    """Gaussian discriminant with shared, ridge-regularized pooled covariance."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    n, d = X.shape
    if classes.size < 2:
        raise ValueError("LDA needs at least 2 classes")
    if n <= classes.size:
        raise ValueError(f"need more samples ({n}) than classes ({classes.size})")
    means = np.vstack([X[y == c].mean(axis=0) for c in classes])
    pooled = np.zeros((d, d))
    for c, mu in zip(classes, means):
        centered = X[y == c] - mu
        pooled += centered.T @ centered
    pooled /= n - classes.size
    reg = pooled + ridge * (np.trace(pooled) / d) * np.eye(d)
    try:
        factor = np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        raise ValueError("pooled covariance not positive definite even after ridge") from None
    priors = np.array([(y == c).mean() for c in classes])
    return LdaModel(classes=classes, class_means=means, cov_factor=factor, priors=priors)


def lda_predict(model: LdaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    # argmax_c  x' S^-1 mu_c - mu_c' S^-1 mu_c / 2 + log prior
    alpha = scipy.linalg.cho_solve((model.cov_factor, True), model.class_means.T).T
    scores = X @ alpha.T - 0.5 * np.sum(model.class_means * alpha, axis=1) + np.log(model.priors)
    return model.classes[np.argmax(scores, axis=1)]


def lda_direction(model: LdaModel) -> np.ndarray:
    """Discriminant direction S^-1 (mu_1 - mu_0) for a two-class model."""
    if model.classes.size != 2:
        raise ValueError("direction is defined for two-class models")
    diff = model.class_means[1] - model.class_means[0]
    return scipy.linalg.cho_solve((model.cov_factor, True), diff)


# ---------------------------------------------------------------------------
# support vector machine (SMO)


@dataclass
class BinarySvm:
    pos_label: object
    neg_label: object
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i at the support vectors
    bias: float
    gamma: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return _rbf_kernel(np.asarray(X, dtype=float), self.support_vectors, self.gamma) @ self.dual_coef + self.bias


@dataclass
class SvmModel:
    classes: np.ndarray
    machines: list[BinarySvm] = field(default_factory=list)
    C: float = 1.0
    gamma: float = 1.0


def _rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-gamma * np.maximum(d2, 0.0))


def _worst_kkt_violation(alpha: np.ndarray, margins: np.ndarray, C: float) -> float:
    """Largest violation of the soft-margin KKT conditions, margins = y * f."""
    eps = 1e-8
    low = alpha < eps
    high = alpha > C - eps
    mid = ~(low | high)
    viol = np.zeros_like(alpha)
    viol[low] = np.maximum(0.0, 1.0 - margins[low])
    viol[high] = np.maximum(0.0, margins[high] - 1.0)
    viol[mid] = np.abs(margins[mid] - 1.0)
    return float(viol.max()) if viol.size else 0.0


def _smo(K, y, C, tol, max_passes, rng):
    """Optimize the SVM dual on a precomputed kernel; returns (alpha, bias).

    Simplified working-pair selection: sweep all points in shuffled order,
    pair each KKT violator with a random partner, solve the 2-variable
    subproblem analytically.  A sweep with no updates triggers a full KKT
    check; exhausting max_passes without satisfying it is an error.
    """
    n = y.size
    alpha = np.zeros(n)
    bias = 0.0
    err = -y.astype(float)  # f(x_i) - y_i with f == 0 initially
    worst = np.inf
    for _ in range(max_passes):
        changed = 0
        for i in rng.permutation(n):
            e_i = err[i]
            r = y[i] * e_i
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0)):
                continue
            j = int(rng.integers(n - 1))
            if j >= i:
                j += 1
            if y[i] != y[j]:
                lo = max(0.0, alpha[j] - alpha[i])
                hi = min(C, C + alpha[j] - alpha[i])
            else:
                lo = max(0.0, alpha[i] + alpha[j] - C)
                hi = min(C, alpha[i] + alpha[j])
            if lo >= hi:
                continue
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0:
                continue
            a_j = np.clip(alpha[j] - y[j] * (e_i - err[j]) / eta, lo, hi)
            if abs(a_j - alpha[j]) < 1e-10:
                continue
            a_i = alpha[i] + y[i] * y[j] * (alpha[j] - a_j)
            d_i = y[i] * (a_i - alpha[i])
            d_j = y[j] * (a_j - alpha[j])
            b1 = bias - e_i - d_i * K[i, i] - d_j * K[i, j]
            b2 = bias - err[j] - d_i * K[i, j] - d_j * K[j, j]
            if 0.0 < a_i < C:
                new_bias = b1
            elif 0.0 < a_j < C:
                new_bias = b2
            else:
                new_bias = 0.5 * (b1 + b2)
            err += d_i * K[:, i] + d_j * K[:, j] + (new_bias - bias)
            alpha[i], alpha[j] = a_i, a_j
            bias = new_bias
            changed += 1
        if changed == 0:
            worst = _worst_kkt_violation(alpha, y * (err + y), C)
            if worst <= tol:
                return alpha, bias
    if not np.isfinite(worst):
        worst = _worst_kkt_violation(alpha, y * (err + y), C)
    raise ConvergenceError(
        f"SMO did not converge in {max_passes} passes (worst KKT violation {worst:.3e})", worst
    )


def svm_fit(
    X,
    y,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_passes: int = 500,
    seed: int = 0,
) -> SvmModel:
    """RBF-kernel SVM; multiclass via one-vs-one machines.

    gamma defaults to 1 / (d * var(X)) over all matrix entries.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("SVM needs at least 2 classes")
    if gamma is None:
        var = X.var()
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]
    model = SvmModel(classes=classes, C=C, gamma=gamma)
    for a, b in itertools.combinations(classes, 2):
        sub = np.flatnonzero((y == a) | (y == b))
        Xs = X[sub]
        ys = np.where(y[sub] == a, 1.0, -1.0)
        K = _rbf_kernel(Xs, Xs, gamma)
        rng = substream(seed, "smo", a, b)
        alpha, bias = _smo(K, ys, C, tol, max_passes, rng)
        sv = alpha > 1e-8
        model.machines.append(
            BinarySvm(
                pos_label=a,
                neg_label=b,
                support_vectors=Xs[sv],
                dual_coef=alpha[sv] * ys[sv],
                bias=bias,
                gamma=gamma,
            )
        )
    return model


def svm_predict(model: SvmModel, X) -> np.ndarray:
    """One-vs-one majority vote; ties broken by summed decision values."""
    X = np.asarray(X, dtype=float)
    class_index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((X.shape[0], model.classes.size))
    scores = np.zeros_like(votes)
    for mach in model.machines:
        f = mach.decision(X)
        p, q = class_index[mach.pos_label], class_index[mach.neg_label]
        votes[f >= 0, p] += 1
        votes[f < 0, q] += 1
        scores[:, p] += f
        scores[:, q] -= f
    best = votes.max(axis=1, keepdims=True)
    tie_scores = np.where(votes == best, scores, -np.inf)
    return model.classes[np.argmax(tie_scores, axis=1)]


# ---------------------------------------------------------------------------
# random forest


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None  # set on leaves


@dataclass
class ForestModel:
    classes: np.ndarray
    trees: list[TreeNode]
    n_trees: int
    seed: int


def _best_split(X, codes, candidates, n_classes):
    n = codes.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), codes] = 1.0
    total = onehot.sum(axis=0)
    cols = X[:, candidates]
    order = np.argsort(cols, axis=0, kind="stable")
    sc = np.take_along_axis(cols, order, axis=0)
    cum = np.cumsum(onehot[order], axis=0)  # (n, F, C), left counts after each row
    valid = sc[1:] > sc[:-1]  # splits land between distinct neighbors
    if not valid.any():
        return np.inf, -1, 0.0
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    left = cum[:-1]
    right = total[None, None, :] - left
    gini_l = 1.0 - np.sum(left**2, axis=2) / nl**2
    gini_r = 1.0 - np.sum(right**2, axis=2) / nr**2
    cost = (nl * gini_l + nr * gini_r) / n
    cost[~valid] = np.inf
    pos, fi = np.unravel_index(int(np.argmin(cost)), cost.shape)
    thr = 0.5 * (sc[pos, fi] + sc[pos + 1, fi])
    return float(cost[pos, fi]), int(candidates[fi]), float(thr)


def _grow_tree(X, codes, rng, max_features, n_classes) -> TreeNode:
    counts = np.bincount(codes, minlength=n_classes).astype(float)
    if codes.size < 2 or np.count_nonzero(counts) == 1:
        return TreeNode(counts=counts)
    candidates = rng.choice(X.shape[1], size=max_features, replace=False)
    _, feat, thr = _best_split(X, codes, candidates, n_classes)
    if feat < 0:
        return TreeNode(counts=counts)
    mask = X[:, feat] < thr
    left = _grow_tree(X[mask], codes[mask], rng, max_features, n_classes)
    right = _grow_tree(X[~mask], codes[~mask], rng, max_features, n_classes)
    return TreeNode(feature=feat, threshold=thr, left=left, right=right)


def forest_fit(X, y, n_trees: int = 100, max_features: int | None = None, seed: int = 0) -> ForestModel:
    """Bootstrap-aggregated Gini trees grown until pure or < 2 samples."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] < 1:
        raise ValueError("need at least one training sample")
    classes = np.unique(y)
    codes = np.searchsorted(classes, y)
    d = X.shape[1]
    if max_features is None:
        max_features = max(1, int(np.sqrt(d)))
    max_features = min(max_features, d)
    trees = []
    for t in range(n_trees):
        rng = substream(seed, "tree", t)
        boot = rng.integers(0, X.shape[0], X.shape[0])
        trees.append(_grow_tree(X[boot], codes[boot], rng, max_features, classes.size))
    return ForestModel(classes=classes, trees=trees, n_trees=n_trees, seed=seed)


def _tree_votes(node: TreeNode, X, idx, votes):
    if node.counts is not None:
        votes[idx, int(np.argmax(node.counts))] += 1
        return
    mask = X[idx, node.feature] < node.threshold
    left_idx = idx[mask]
    right_idx = idx[~mask]
    if left_idx.size:
        _tree_votes(node.left, X, left_idx, votes)
    if right_idx.size:
        _tree_votes(node.right, X, right_idx, votes)


def forest_predict(model: ForestModel, X) -> np.ndarray:
    """Majority vote over trees; vote ties go to the lower class index."""
    X = np.asarray(X, dtype=float)
    votes = np.zeros((X.shape[0], model.classes.size), dtype=int)
    idx = np.arange(X.shape[0])
    for tree in model.trees:
        _tree_votes(tree, X, idx, votes)
    return model.classes[np.argmax(votes, axis=1)]


# ---------------------------------------------------------------------------
# cross-validation harness


@dataclass
class CVReport:
    """Per task x classifier fold accuracies, Table-style."""

    tasks: list[str]
    classifiers: list[str]
    fold_accuracies: dict = field(default_factory=dict)  # (task, clf) -> array of k accuracies

    def mean(self, task: str, clf: str) -> float:
        return float(np.mean(self.fold_accuracies[(task, clf)]))


def _task_subset(X, y, task):
    if task == "multiclass":
        return X, y
    if task not in BINARY_TASKS:
        raise ValueError(f"unknown task {task!r}")
    a, b = BINARY_TASKS[task]
    sel = np.flatnonzero((y == a) | (y == b))
    return X[sel], y[sel]


def _fit_predict(clf, Xtr, ytr, Xte, seed, params):
    if clf == "lda":
        model = lda_fit(Xtr, ytr, ridge=params.get("ridge", 1e-4))
        return lda_predict(model, Xte)
    if clf == "svm":
        model = svm_fit(
            Xtr,
            ytr,
            C=params.get("svm_c", 1.0),
            gamma=params.get("svm_gamma"),
            tol=params.get("svm_tol", 1e-3),
            max_passes=params.get("svm_max_passes", 500),
            seed=seed,
        )
        return svm_predict(model, Xte)
    if clf == "rf":
        model = forest_fit(
            Xtr,
            ytr,
            n_trees=params.get("n_trees", 100),
            max_features=params.get("max_features"),
            seed=seed,
        )
        return forest_predict(model, Xte)
    raise ValueError(f"unknown classifier {clf!r}, expected one of {CLASSIFIERS}")


def run_cv(
    feature_matrix,
    tasks=TASKS,
    classifiers=CLASSIFIERS,
    k: int = 5,
    seed: int = 0,
    standardize: str = "train",
    **params,
) -> CVReport:
    """Stratified k-fold accuracies per task and classifier.

    ``standardize='train'`` fits the standardizer on training rows and
    applies it to both sides (no leakage).  ``'literal'`` standardizes train
    and test sets each on their own statistics, for comparison.
    """
    if standardize not in ("train", "literal"):
        raise ValueError(f"standardize must be 'train' or 'literal', got {standardize!r}")
    X = feature_matrix.matrix if hasattr(feature_matrix, "matrix") else np.asarray(feature_matrix)
    y = np.asarray(feature_matrix.labels if hasattr(feature_matrix, "labels") else params.pop("labels"))
    report = CVReport(tasks=list(tasks), classifiers=list(classifiers))
    for task in tasks:
        Xt, yt = _task_subset(X, y, task)
        if np.unique(yt).size < 2:
            raise ValueError(f"task requires >= 2 classes, got {np.unique(yt).size} in task {task!r}")
        folds = stratified_kfold(yt, k=k, seed=derive_seed(seed, "folds", task))
        for clf in classifiers:
            accs = np.zeros(k)
            for fold_i, (train, test) in enumerate(folds):
                scaler = fit_standardizer(Xt[train])
                Xtr = scaler.apply(Xt[train])
                if standardize == "train":
                    Xte = scaler.apply(Xt[test])
                else:
                    Xte = fit_standardizer(Xt[test]).apply(Xt[test])
                pred = _fit_predict(clf, Xtr, yt[train], Xte, derive_seed(seed, clf, task, fold_i), params)
                accs[fold_i] = float(np.mean(pred == yt[test]))
            report.fold_accuracies[(task, clf)] = accs
    return report


TASK_TITLES = {
    "multiclass": "Multiclass",
    "power_vs_none": "Power vs None",
    "precision_vs_none": "Precision vs None",
    "power_vs_precision": "Power vs Precision",
}


def report_csv(report: CVReport) -> str:
    k = len(next(iter(report.fold_accuracies.values())))
    header = ["task", "classifier"] + [f"fold_{i + 1}" for i in range(k)] + ["mean"]
    lines = [",".join(header)]
    for task in report.tasks:
        for clf in report.classifiers:
            accs = report.fold_accuracies[(task, clf)]
            cells = [task, clf] + [f"{a:.6f}" for a in accs] + [f"{report.mean(task, clf):.6f}"]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def report_table(report: CVReport) -> str:
    """Aligned text table: tasks as column groups, classifiers as sub-columns,
    fold rows first and the mean row last."""
    k = len(next(iter(report.fold_accuracies.values())))
    col_w = 7
    group_w = col_w * len(report.classifiers) + 1
    label_w = 8
    lines = []
    head1 = " " * label_w + "|"
    head2 = " " * label_w + "|"
    for task in report.tasks:
        head1 += f" {TASK_TITLES.get(task, task):<{group_w - 2}} |"
        head2 += " " + "".join(f"{c.upper():<{col_w}}" for c in report.classifiers) + "|"
    lines.append(head1)
    lines.append(head2)
    lines.append("-" * len(head1))
    for row in range(k + 1):
        name = "Mean" if row == k else f"Fold {row + 1}"
        line = f"{name:<{label_w}}|"
        for task in report.tasks:
            cells = ""
            for clf in report.classifiers:
                accs = report.fold_accuracies[(task, clf)]
                v = report.mean(task, clf) if row == k else accs[row]
                cells += f"{v:<{col_w}.3f}"
            line += " " + cells + "|"
        if row == k:
            lines.append("-" * len(head1))
        lines.append(line)
    return "\n".join(lines) + "\n"
