"""Joint training of small softmax classifiers with a decorrelation penalty.

Each ensemble member is a one-hidden-layer network (leaky rectifier, slope
0.01) that sees the input through its own view, an orthonormal linear map
standing in for a different sensor.  Members are trained together on the
sum of their cross-entropies plus, for every pair (i, j),

    J_ij = -mean[ 1{h_i wrong} ln(1 - P_j(h_i(x))) + 1{h_j wrong} ln(1 - P_i(h_j(x))) ]

weighted by ``lam * 2 / (n - 1)``.  The error indicators and the predicted
classes are treated as constants when differentiating.

All member parameters are stacked along a leading axis so one matmul
serves the whole ensemble.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DomainError, TrainingDivergedError
from .indicators import IndicatorMatrix, SoftmaxTensor, accuracies, committee_predict, _phi, contingency_counts
from .kofn import k_of_n_curve

LEAK = 0.01
PROB_FLOOR = 1e-12
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PARAM_NAMES = ("W1", "b1", "W2", "b2")


def derive_seed(master: int, index: int) -> int:
    """Independent 63-bit seed for stream ``index`` under ``master``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# -- data --------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    """Gaussian class clusters; ``separation`` scales the random class centers."""

    n_classes: int = 5
    input_dim: int = 12
    n_train: int = 3000
    n_val: int = 1000
    n_test: int = 3000
    separation: float = 1.2
    spread: float = 1.0
    seed: int = 0


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    spec: DatasetSpec
    centers: np.ndarray
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray


def _balanced_labels(n, n_classes, rng):
    return rng.permutation(np.arange(n) % n_classes)


def make_dataset(spec: DatasetSpec = DatasetSpec()) -> SyntheticDataset:
    """Draw train/validation/test splits; class counts differ by at most one."""
    if spec.n_classes < 2:
        raise DomainError("need at least two classes")
    rng = np.random.default_rng(spec.seed)
    centers = spec.separation * rng.standard_normal((spec.n_classes, spec.input_dim))
    splits = []
    for n in (spec.n_train, spec.n_val, spec.n_test):
        y = _balanced_labels(n, spec.n_classes, rng)
        x = centers[y] + spec.spread * rng.standard_normal((n, spec.input_dim))
        splits += [x, y]
    return SyntheticDataset(spec, centers, *splits)


# -- views -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ViewSpec:
    """Linear sensor view ``x -> x @ matrix`` with orthonormal columns.

    A square matrix is an invertible rotation/reflection of the input.  A
    matrix with fewer columns than rows rotates and then drops coordinates,
    like projecting a rotated 3-D object onto a plane.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] > m.shape[0] or m.shape[1] < 1:
            raise DomainError(f"view matrix must be (d, k) with 1 <= k <= d, got {m.shape}")
        if not np.allclose(m.T @ m, np.eye(m.shape[1]), atol=1e-10):
            raise DomainError("view matrix columns must be orthonormal")
        object.__setattr__(self, "matrix", m)

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def view_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def invertible(self) -> bool:
        return self.view_dim == self.input_dim

    def apply(self, x):
        return np.asarray(x) @ self.matrix

    @classmethod
    def identity(cls, dim: int) -> ViewSpec:
        return cls(np.eye(dim))

    @classmethod
    def random_orthogonal(cls, dim: int, rng, keep: int | None = None) -> ViewSpec:
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        q = q * np.sign(np.diag(r))
        return cls(q[:, : (keep or dim)])

    @classmethod
    def rotation(cls, dim: int, angle: float, plane=(0, 1), keep: int | None = None) -> ViewSpec:
        """Rotation by ``angle`` in one coordinate plane, optionally dropping trailing coordinates."""
        a, b = plane
        m = np.eye(dim)
        c, s = math.cos(angle), math.sin(angle)
        m[a, a], m[a, b], m[b, a], m[b, b] = c, -s, s, c
        return cls(m[:, : (keep or dim)])


VIEW_MODES = ("identity", "identical", "distinct")


def make_views(mode: str, input_dim: int, n_members: int, view_dim: int | None = None,
               seed: int = 0) -> list[ViewSpec]:
    """Views for an ensemble.

    ``identity``: every member sees the raw input.  ``identical``: all
    members share one random view.  ``distinct``: each member gets its own
    random view.
    """
    rng = np.random.default_rng(seed)
    if mode == "identity":
        if view_dim not in (None, input_dim):
            raise DomainError("identity views cannot reduce the dimension")
        return [ViewSpec.identity(input_dim)] * n_members
    if mode == "identical":
        return [ViewSpec.random_orthogonal(input_dim, rng, view_dim)] * n_members
    if mode == "distinct":
        return [ViewSpec.random_orthogonal(input_dim, rng, view_dim) for _ in range(n_members)]
    raise DomainError(f"unknown view mode {mode!r}; choose from {', '.join(VIEW_MODES)}")


# -- model -------------------------------------------------------------------

@dataclass(eq=False)
class EnsembleModel:
    """Stacked parameters: W1 (n, k, h), b1 (n, h), W2 (n, h, C), b2 (n, C)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    views: list[ViewSpec]

    def __post_init__(self):
        n = self.W1.shape[0]
        if len(self.views) != n:
            raise DomainError(f"{len(self.views)} views for {n} members")
        dims = {v.view_dim for v in self.views}
        if dims != {self.W1.shape[1]}:
            raise DomainError("every view must produce the members' input width")

    @property
    def n_members(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[2]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[2]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> EnsembleModel:
        return EnsembleModel(*(getattr(self, n).copy() for n in PARAM_NAMES), list(self.views))

    def permuted(self, order) -> EnsembleModel:
        order = list(order)
        return EnsembleModel(*(getattr(self, n)[order].copy() for n in PARAM_NAMES),
                             [self.views[i] for i in order])

    def view_stack(self) -> np.ndarray:
        return np.stack([v.matrix for v in self.views])

    def forward(self, x):
        xv = np.matmul(np.asarray(x, dtype=float)[None], self.view_stack())
        pre = xv @ self.W1 + self.b1[:, None, :]
        hidden = np.where(pre > 0, pre, LEAK * pre)
        logits = hidden @ self.W2 + self.b2[:, None, :]
        return xv, pre, hidden, logits

    def predict_proba(self, x) -> np.ndarray:
        """Class probabilities with shape (samples, members, classes)."""
        logits = self.forward(x)[3]
        return np.transpose(_softmax(logits), (1, 0, 2))

    def softmax_tensor(self, x, y, names=None) -> SoftmaxTensor:
        names = names or tuple(f"m{i}" for i in range(self.n_members))
        return SoftmaxTensor(self.predict_proba(x), np.asarray(y), names)


def init_ensemble(n_members: int, views: list[ViewSpec], hidden_dim: int, n_classes: int,
                  rng) -> EnsembleModel:
    """Glorot-uniform weights and zero biases."""
    k = views[0].view_dim
    lim1 = math.sqrt(6.0 / (k + hidden_dim))
    lim2 = math.sqrt(6.0 / (hidden_dim + n_classes))
    return EnsembleModel(
        W1=rng.uniform(-lim1, lim1, (n_members, k, hidden_dim)),
        b1=np.zeros((n_members, hidden_dim)),
        W2=rng.uniform(-lim2, lim2, (n_members, hidden_dim, n_classes)),
        b2=np.zeros((n_members, n_classes)),
        views=list(views),
    )


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


# -- losses ------------------------------------------------------------------

def pairwise_decorrelation_loss(probs_i, probs_j, labels) -> float:
    """Decorrelation penalty J_ij from two (samples, classes) probability arrays."""
    probs_i = np.asarray(probs_i, dtype=float)
    probs_j = np.asarray(probs_j, dtype=float)
    labels = np.asarray(labels)
    if probs_i.shape != probs_j.shape or probs_i.ndim != 2 or probs_i.shape[0] < 1:
        raise DomainError("need two nonempty (samples, classes) arrays of equal shape")
    rows = np.arange(labels.size)
    ci = probs_i.argmax(axis=1)
    cj = probs_j.argmax(axis=1)
    # P_j evaluated at model i's wrong prediction, and vice versa
    a = np.maximum(1.0 - probs_j[rows, ci], PROB_FLOOR)
    b = np.maximum(1.0 - probs_i[rows, cj], PROB_FLOOR)
    terms = (ci != labels) * np.log(a) + (cj != labels) * np.log(b)
    return float(-terms.mean())


def _penalty_weight(n, lam):
    return 0.0 if n < 2 else lam * 2.0 / (n - 1)


def ensemble_penalty_from_probs(probs, labels, lam) -> float:
    """``lam * 2/(n-1) * sum_{i>j} J_ij`` for probabilities of shape (samples, members, classes)."""
    probs = np.asarray(probs)
    n = probs.shape[1]
    if n < 2:
        raise DomainError("the ensemble penalty needs at least two members")
    total = math.fsum(
        pairwise_decorrelation_loss(probs[:, i], probs[:, j], labels)
        for i in range(1, n) for j in range(i)
    )
    return _penalty_weight(n, lam) * total


def ensemble_penalty(x, y, model: EnsembleModel, lam: float) -> float:
    return ensemble_penalty_from_probs(model.predict_proba(x), y, lam)


def model_pair_loss(x, y, model: EnsembleModel, i: int, j: int) -> float:
    probs = model.predict_proba(x)
    return pairwise_decorrelation_loss(probs[:, i], probs[:, j], y)


def loss_and_grad(model: EnsembleModel, x, y, lam: float, weight_decay: float = 0.0,
                  with_grad: bool = True):
    """Total objective and its gradient with respect to every parameter array.

    Returns ``(total, parts, grads)`` where ``parts`` splits the total into
    cross-entropy, penalty and weight-decay contributions.
    """
    y = np.asarray(y)
    m = y.size
    if m < 1:
        raise DomainError("empty batch")
    n = model.n_members
    n_classes = model.n_classes
    xv, pre, hidden, logits = model.forward(x)
    log_p = _log_softmax(logits)
    probs = np.exp(log_p)
    rows = np.arange(m)
    onehot_y = np.zeros((m, n_classes))
    onehot_y[rows, y] = 1.0

    ce = float(-log_p[:, rows, y].sum() / m)
    d_logits = (probs - onehot_y[None]) / m

    penalty = 0.0
    weight = _penalty_weight(n, lam)
    if weight > 0.0:
        pred = probs.argmax(axis=2)                       # (n, m)
        wrong = pred != y[None, :]
        # s[j, i, r] = P_j(pred_i(x_r)); the i == j terms are excluded
        s = probs[:, rows[None, :], pred]
        active = wrong[None, :, :] & ~np.eye(n, dtype=bool)[:, :, None]
        one_minus = 1.0 - s
        floor_hit = one_minus < PROB_FLOOR
        safe = np.maximum(one_minus, PROB_FLOOR)
        penalty = weight * float(-(active * np.log(safe)).sum() / m)
        if with_grad:
            g = np.where(active & ~floor_hit, s / safe, 0.0) * (weight / m)   # (j, i, r)
            onehot_pred = np.zeros((n, m, n_classes))
            onehot_pred[np.arange(n)[:, None], rows[None, :], pred] = 1.0
            d_logits += np.einsum("jir,irc->jrc", g, onehot_pred) - g.sum(axis=1)[:, :, None] * probs

    decay = 0.0
    if weight_decay:
        decay = weight_decay * float(sum((p * p).sum() for p in model.params().values()))
    total = ce + penalty + decay
    parts = {"cross_entropy": ce, "penalty": penalty, "weight_decay": decay}
    if not with_grad:
        return total, parts, None

    grads = {
        "W2": np.transpose(hidden, (0, 2, 1)) @ d_logits,
        "b2": d_logits.sum(axis=1),
    }
    d_hidden = d_logits @ np.transpose(model.W2, (0, 2, 1))
    d_pre = d_hidden * np.where(pre > 0, 1.0, LEAK)
    grads["W1"] = np.transpose(xv, (0, 2, 1)) @ d_pre
    grads["b1"] = d_pre.sum(axis=1)
    if weight_decay:
        for name, p in model.params().items():
            grads[name] = grads[name] + 2.0 * weight_decay * p
    return total, parts, grads


def total_loss(x, y, model: EnsembleModel, lam: float, weight_decay: float = 0.0) -> float:
    return loss_and_grad(model, x, y, lam, weight_decay, with_grad=False)[0]


# -- training ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of one joint training run.

    The learning rate starts at ``learning_rate``; after ``patience`` epochs
    without a validation-loss improvement larger than ``min_delta`` it drops
    to ``final_learning_rate``, and the next stagnation ends training.
    """

    lam: float = 0.0
    n_members: int = 5
    hidden_dim: int = 32
    batch_size: int = 256
    learning_rate: float = 1e-2
    final_learning_rate: float = 1e-3
    patience: int = 5
    min_delta: float = 1e-4
    weight_decay: float = 1e-4
    max_epochs: int = 60
    seed: int = 0
    train_fraction: float = 1.0
    view_mode: str = "identity"
    view_dim: int | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError(f"lam must be >= 0, got {self.lam!r}")
        if self.learning_rate <= 0 or self.final_learning_rate <= 0:
            raise DomainError("learning rates must be positive")
        if self.n_members < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise DomainError("n_members, batch_size and max_epochs must be positive")
        if not 0.0 < self.train_fraction <= 1.0:
            raise DomainError("train_fraction must lie in (0, 1]")
        if self.view_mode not in VIEW_MODES:
            raise DomainError(f"unknown view mode {self.view_mode!r}")


@dataclass(frozen=True)
class EvalMetrics:
    loss: float
    avg_accuracy: float
    joint_accuracy: float
    committee_accuracy: float
    mean_rho: float | None
    member_accuracy: list[float]
    k_of_n: list[float]


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    learning_rate: float
    train_loss: float
    validation: EvalMetrics


@dataclass(eq=False)
class TrainingResult:
    model: EnsembleModel
    config: TrainingConfig
    history: list[EpochMetrics] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.history)


def _mean_rho_or_none(values):
    n = values.shape[1]
    rhos = []
    for i in range(n):
        for j in range(i + 1, n):
            phi = _phi(*contingency_counts(values[:, i], values[:, j]))
            if phi is None:
                return None
            rhos.append(phi)
    return float(np.mean(rhos)) if rhos else None


def evaluate(model: EnsembleModel, x, y, lam: float = 0.0) -> EvalMetrics:
    """Loss (without weight decay) and ensemble metrics on a labeled split.

    ``mean_rho`` is ``None`` when some member never errs or always errs.
    """
    y = np.asarray(y)
    loss = loss_and_grad(model, x, y, lam, 0.0, with_grad=False)[0]
    softmax = model.softmax_tensor(x, y)
    ind = softmax.indicators()
    avg, joint = accuracies(ind)
    _, committee_err = committee_predict(softmax)
    return EvalMetrics(
        loss=loss,
        avg_accuracy=avg,
        joint_accuracy=joint,
        committee_accuracy=1.0 - float(committee_err.mean()),
        mean_rho=_mean_rho_or_none(ind.values) if model.n_members > 1 else None,
        member_accuracy=[1.0 - float(c) for c in ind.values.mean(axis=0)],
        k_of_n=k_of_n_curve(ind),
    )


class _Adam:
    def __init__(self, params):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * g
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * g * g
            p -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + ADAM_EPS)


def train_ensemble(config: TrainingConfig, dataset: SyntheticDataset,
                   views: list[ViewSpec] | None = None, log=None) -> TrainingResult:
    """Mini-batch Adam training of the whole ensemble on the joint objective.

    Deterministic for a fixed ``config.seed``.  Raises
    :class:`TrainingDivergedError` if a batch loss is not finite.
    """
    rng = np.random.default_rng(config.seed)
    d = dataset.x_train.shape[1]
    if views is None:
        views = make_views(config.view_mode, d, config.n_members, config.view_dim,
                           seed=derive_seed(config.seed, 1))
    if len(views) != config.n_members:
        raise DomainError(f"{len(views)} views for {config.n_members} members")
    n_classes = int(dataset.spec.n_classes)
    model = init_ensemble(config.n_members, views, config.hidden_dim, n_classes, rng)

    x_train, y_train = dataset.x_train, dataset.y_train
    if config.train_fraction < 1.0:
        keep = rng.permutation(y_train.size)[: max(1, int(round(config.train_fraction * y_train.size)))]
        x_train, y_train = x_train[np.sort(keep)], y_train[np.sort(keep)]

    params = model.params()
    adam = _Adam(params)
    lr = config.learning_rate
    phase = 0
    best = math.inf
    waited = 0
    result = TrainingResult(model=model, config=config)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(y_train.size)
        batch_losses = []
        for start in range(0, order.size, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, parts, grads = loss_and_grad(model, x_train[idx], y_train[idx],
                                               config.lam, config.weight_decay)
            if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}: "
                    f"{parts} (lam={config.lam}, lr={lr})"
                )
            adam.step(params, grads, lr)
            batch_losses.append(loss)
        val = evaluate(model, dataset.x_val, dataset.y_val, config.lam)
        result.history.append(EpochMetrics(epoch, lr, float(np.mean(batch_losses)), val))
        if log is not None:
            log(result.history[-1])
        if val.loss < best - config.min_delta:
            best = val.loss
            waited = 0
        else:
            waited += 1
        if waited >= config.patience:
            if phase == 0:
                phase, lr, waited = 1, config.final_learning_rate, 0
            else:
                result.stop_reason = "stagnation"
                break
    else:
        result.stop_reason = "max_epochs"
    return result


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    lam: float
    repetition: int
    seed: int
    mean_rho: float | None
    avg_accuracy: float | None
    joint_accuracy: float | None
    committee_accuracy: float | None
    k_of_n: list[float] | None
    epochs: int
    error: str | None = None


def run_cell(config: TrainingConfig, dataset: SyntheticDataset, lam: float,
             repetition: int, master_seed: int) -> SweepCell:
    seed = derive_seed(master_seed, repetition)
    cfg = replace(config, lam=lam, seed=seed)
    try:
        result = train_ensemble(cfg, dataset)
    except (TrainingDivergedError, FloatingPointError) as exc:
        return SweepCell(lam, repetition, seed, None, None, None, None, None, 0, str(exc))
    test = evaluate(result.model, dataset.x_test, dataset.y_test, lam)
    return SweepCell(
        lam=lam, repetition=repetition, seed=seed, mean_rho=test.mean_rho,
        avg_accuracy=test.avg_accuracy, joint_accuracy=test.joint_accuracy,
        committee_accuracy=test.committee_accuracy, k_of_n=test.k_of_n,
        epochs=result.epochs,
    )


def _run_cell_args(args):
    return run_cell(*args)


@dataclass(frozen=True)
class SweepSummary:
    lam: float
    n_ok: int
    mean_rho: float
    mean_rho_std: float
    avg_accuracy: float
    avg_accuracy_std: float
    joint_accuracy: float
    joint_accuracy_std: float
    committee_accuracy: float
    k_of_n: list[float]


@dataclass(eq=False)
class SweepReport:
    grid: list[float]
    repetitions: int
    n_members: int
    master_seed: int
    cells: list[SweepCell]
    elapsed_seconds: float = 0.0

    def cells_for(self, lam):
        return [c for c in self.cells if c.lam == lam]

    def summary(self) -> list[SweepSummary]:
        out = []
        for lam in self.grid:
            ok = [c for c in self.cells_for(lam) if c.error is None]

            def stats(values):
                values = [v for v in values if v is not None]
                if not values:
                    return math.nan, math.nan
                a = np.asarray(values, dtype=float)
                return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0

            rho, rho_sd = stats(c.mean_rho for c in ok)
            avg, avg_sd = stats(c.avg_accuracy for c in ok)
            joint, joint_sd = stats(c.joint_accuracy for c in ok)
            comm, _ = stats(c.committee_accuracy for c in ok)
            kofn = (np.mean([c.k_of_n for c in ok], axis=0).tolist() if ok
                    else [math.nan] * self.n_members)
            out.append(SweepSummary(lam, len(ok), rho, rho_sd, avg, avg_sd, joint, joint_sd, comm, kofn))
        return out

    def to_csv(self) -> str:
        header = ["lambda", "repetition", "mean_rho", "avg_acc", "joint_acc"] + [
            f"k{k}" for k in range(1, self.n_members + 1)
        ]
        lines = [",".join(header)]

        def fmt(v):
            return "" if v is None else repr(float(v))

        for c in self.cells:
            kofn = c.k_of_n or [None] * self.n_members
            lines.append(",".join([repr(float(c.lam)), str(c.repetition), fmt(c.mean_rho),
                                   fmt(c.avg_accuracy), fmt(c.joint_accuracy)]
                                  + [fmt(v) for v in kofn]))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "grid": self.grid,
            "repetitions": self.repetitions,
            "n_members": self.n_members,
            "master_seed": self.master_seed,
            "summary": [asdict(s) for s in self.summary()],
            "failed_cells": [asdict(c) for c in self.cells if c.error is not None],
        }


def lambda_sweep(config: TrainingConfig, dataset: SyntheticDataset, grid, repetitions: int,
                 master_seed: int = 0, jobs: int = 1) -> SweepReport:
    """Train one ensemble per (lambda, repetition) and evaluate on the test split.

    Repetition ``r`` uses seed ``derive_seed(master_seed, r)`` for every
    lambda, so cells in one row differ only by the penalty weight.  A failed
    cell records its error instead of aborting the sweep.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise DomainError("lambda grid is empty")
    if repetitions < 1:
        raise DomainError("repetitions must be positive")
    tasks = [(config, dataset, lam, r, master_seed) for lam in grid for r in range(repetitions)]
    start = time.perf_counter()
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell_args, tasks))
    else:
        cells = [_run_cell_args(t) for t in tasks]
    return SweepReport(grid, repetitions, config.n_members, master_seed, cells,
                       time.perf_counter() - start)
