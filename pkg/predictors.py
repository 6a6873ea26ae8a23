# qcloud-lab/predictors.py - Fidelity and Execution-Time Predictors

"""Product-of-linear-terms models, fitted by damped Gauss-Newton.

Both predictors share the form ``prod(a_i + b_i * x_i)``. The fidelity
correlator takes the four post-compilation features; the execution-time model
takes the seven job/machine runtime features.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from circuits import Circuit, circuit_stats
from errors import (
    DimensionMismatchError,
    InsufficientSamplesError,
    ValidationError,
    ZeroVarianceError,
)
from utils.serialization import read_json, write_json

logger = logging.getLogger(__name__)

DEFAULT_TRAIN_FRACTION = 0.7
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 200
DEFAULT_RUNTIME_FLOOR = 1.0
MAX_STEP_HALVINGS = 20
MEMORY_SLOT_CAP = 75

RUNTIME_FEATURES = ('batch_size', 'shots', 'depth', 'width', 'total_gates', 'machine_size', 'memory_slots')


@dataclass(frozen=True)
class ProductLinearModel:
    terms: Tuple[Tuple[float, float], ...]
    feature_names: Tuple[str, ...]

    def __post_init__(self):
        if not self.terms or len(self.terms) != len(self.feature_names):
            raise ValidationError(
                f"model needs one (a, b) term per feature: {len(self.terms)} terms, {len(self.feature_names)} names"
            )


@dataclass(frozen=True)
class FitReport:
    model: ProductLinearModel
    train_pearson: float
    test_pearson: float
    split_seed: int
    train_fraction: float
    iterations: int = 0
    train_sse: float = 0.0


@dataclass(frozen=True)
class JobRuntimeFeatures:
    batch_size: int
    shots: int
    depth: int
    width: int
    total_gates: int
    machine_size: int
    memory_slots: int

    def as_vector(self) -> Tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in RUNTIME_FEATURES)

    @classmethod
    def for_circuit(cls, circuit: Circuit, batch_size: int, shots: int, machine_size: int) -> 'JobRuntimeFeatures':
        width, total_gates, _, depth = circuit_stats(circuit)
        return cls(
            batch_size=batch_size,
            shots=shots,
            depth=depth,
            width=width,
            total_gates=total_gates,
            machine_size=machine_size,
            memory_slots=min(batch_size, MEMORY_SLOT_CAP),
        )


def predict(model: ProductLinearModel, x: Sequence[float]) -> float:
    if len(x) != len(model.terms):
        raise DimensionMismatchError(f"model has {len(model.terms)} terms, got {len(x)} features")
    result = 1.0
    for (a, b), xi in zip(model.terms, x):
        result *= a + b * xi
    return result


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValidationError(f"pearson needs two equal-length series of at least 2 values, got {x.size} and {y.size}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ZeroVarianceError("pearson is undefined for a constant series")
    r = float(np.corrcoef(x, y)[0, 1])
    return max(-1.0, min(1.0, r))


def _report_pearson(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Pearson for fit reports; a constant series scores 1.0 if it matches exactly, else 0.0."""
    try:
        return pearson(predicted, actual)
    except ZeroVarianceError:
        return 1.0 if np.allclose(predicted, actual, rtol=1e-9, atol=1e-12) else 0.0


def _evaluate(a: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.prod(a + b * X, axis=1)


def _jacobian(a: np.ndarray, b: np.ndarray, X: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Columns: d/da_i for every term, then d/db_i for the active terms."""
    factors = a + b * X
    k = X.shape[1]
    others = np.empty_like(factors)
    for i in range(k):
        others[:, i] = np.prod(np.delete(factors, i, axis=1), axis=1)
    columns = [others]
    if active.any():
        columns.append(others[:, active] * X[:, active])
    return np.hstack(columns)


def _gauss_newton(
    a: np.ndarray,
    b: np.ndarray,
    Z: np.ndarray,
    y: np.ndarray,
    active: np.ndarray,
    max_iter: int,
    tol: float,
) -> Tuple[np.ndarray, np.ndarray, float, int]:
    """Gauss-Newton from (a, b), halving a step until the residual decreases."""
    k = Z.shape[1]
    residual = y - _evaluate(a, b, Z)
    sse = float(residual @ residual)
    iterations = 0

    while iterations < max_iter and sse > 0.0:
        J = _jacobian(a, b, Z, active)
        step, *_ = np.linalg.lstsq(J, residual, rcond=None)
        step_a, step_b = step[:k], np.zeros(k)
        step_b[active] = step[k:]

        alpha = 1.0
        accepted = False
        for _ in range(MAX_STEP_HALVINGS + 1):
            a_new, b_new = a + alpha * step_a, b + alpha * step_b
            r_new = y - _evaluate(a_new, b_new, Z)
            sse_new = float(r_new @ r_new)
            if np.isfinite(sse_new) and sse_new < sse:
                accepted = True
                break
            alpha /= 2.0
        if not accepted:
            break

        improvement = (sse - sse_new) / sse
        a, b, residual, sse = a_new, b_new, r_new, sse_new
        iterations += 1
        if improvement < tol:
            break

    return a, b, sse, iterations


def _single_term_start(Z: np.ndarray, y: np.ndarray, i: int) -> Tuple[np.ndarray, np.ndarray]:
    """Start where term i is the straight-line fit of y and every other term is 1."""
    k = Z.shape[1]
    design = np.column_stack([np.ones(len(y)), Z[:, i]])
    (ai, bi), *_ = np.linalg.lstsq(design, y, rcond=None)
    a, b = np.ones(k), np.zeros(k)
    a[i], b[i] = ai, bi
    return a, b


def fit_product_linear(
    samples: Sequence[Tuple[Sequence[float], float]],
    feature_names: Optional[Sequence[str]] = None,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    split_seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> FitReport:
    """Least-squares fit of ``prod(a_i + b_i * x_i)`` on a seeded train/test split.

    The fit runs on standardized features and a target divided by its mean
    magnitude, so one scale fits counts in the thousands and error rates in
    the thousandths alike. Gauss-Newton starts from a_i = 1, b_i = 0 and is
    restarted from every single-term line fit; the run with the lowest
    training residual wins and is mapped back to raw units. Features that are
    constant on the training split keep b_i = 0.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if not samples:
        raise InsufficientSamplesError("no samples to fit")

    k = len(samples[0][0])
    if any(len(x) != k for x, _ in samples):
        raise DimensionMismatchError("all samples must have the same number of features")
    if len(samples) < 2 * k:
        raise InsufficientSamplesError(f"need at least {2 * k} samples for {k} features, got {len(samples)}")

    names = tuple(feature_names) if feature_names is not None else tuple(f'x{i}' for i in range(k))
    if len(names) != k:
        raise DimensionMismatchError(f"{len(names)} feature names for {k} features")

    X_all = np.asarray([x for x, _ in samples], dtype=float)
    y_all = np.asarray([y for _, y in samples], dtype=float)
    if not np.all(np.isfinite(y_all)) or not np.all(np.isfinite(X_all)):
        raise ValidationError("samples must be finite")

    n = len(samples)
    order = np.random.default_rng(split_seed).permutation(n)
    n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
    train, test = order[:n_train], order[n_train:]
    X, y = X_all[train], y_all[train]

    active = np.ptp(X, axis=0) > 0
    for name, is_active in zip(names, active):
        if not is_active:
            logger.warning(f"Feature '{name}' is constant on the training split; fixing b=0")

    center = np.where(active, X.mean(axis=0), 0.0)
    spread = np.where(active, X.std(axis=0), 1.0)
    spread[spread == 0] = 1.0
    Z = np.where(active, (X - center) / spread, 0.0)
    scale = float(np.mean(np.abs(y))) or 1.0
    target = y / scale

    starts = [(np.ones(k), np.zeros(k))]
    starts += [_single_term_start(Z, target, i) for i in np.flatnonzero(active)]
    best = None
    iterations = 0
    for a0, b0 in starts:
        a_s, b_s, sse_s, iters = _gauss_newton(a0, b0, Z, target, active, max_iter, tol)
        iterations += iters
        if best is None or sse_s < best[2]:
            best = (a_s, b_s, sse_s)
        if sse_s == 0.0:
            break
    a_s, b_s, sse_s = best

    # back to raw units: a_i + b_i * x_i = a'_i + b'_i * (x_i - center_i) / spread_i
    b = b_s / spread
    a = a_s - b * center
    a[0] *= scale
    b[0] *= scale
    sse = sse_s * scale * scale

    model = ProductLinearModel(tuple((float(ai), float(bi)) for ai, bi in zip(a, b)), names)
    train_r = _report_pearson(_evaluate(a, b, X), y)
    test_r = _report_pearson(_evaluate(a, b, X_all[test]), y_all[test])
    logger.info(
        f"Fitted {k}-term product model on {n_train}/{n} samples in {iterations} iterations "
        f"({len(starts)} starts): train r={train_r:.3f}, test r={test_r:.3f}"
    )
    return FitReport(model, train_r, test_r, split_seed, train_fraction, iterations, sse)


def feature_correlations(
    samples: Sequence[Tuple[Sequence[float], float]],
    feature_names: Sequence[str],
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    split_seed: int = 0,
) -> Dict[str, float]:
    """Test-split Pearson of a one-term model per feature, on the same split as the tuned model."""
    table = {}
    for i, name in enumerate(feature_names):
        single = [((x[i],), y) for x, y in samples]
        table[name] = fit_product_linear(single, (name,), train_fraction, split_seed).test_pearson
    return table


def predict_exec_time(model: ProductLinearModel, jf: JobRuntimeFeatures, floor: float = DEFAULT_RUNTIME_FLOOR) -> float:
    return max(predict(model, jf.as_vector()), floor)


def estimate_queue_time(
    queue: Sequence[JobRuntimeFeatures],
    model: ProductLinearModel,
    remaining_current: float = 0.0,
    floor: float = DEFAULT_RUNTIME_FLOOR,
) -> float:
    """Predicted time until a newly queued job would start."""
    total = 0.0
    for jf in queue:
        total += predict_exec_time(model, jf, floor)
    return remaining_current + total


@dataclass(frozen=True)
class TimingGenerator:
    """Synthetic stand-in for observed cloud execution times.

    time = c0 * batch * (c1 + c2 * shots) * (1 + machine_overhead * machine_size),
    scaled by a uniform multiplicative noise in [1 - noise, 1 + noise].
    """

    c0: float = 1.0
    c1: float = 2.0
    c2: float = 0.002
    machine_overhead: float = 0.005
    noise: float = 0.05

    def base_time(self, jf: JobRuntimeFeatures) -> float:
        return self.c0 * jf.batch_size * (self.c1 + self.c2 * jf.shots) * (1.0 + self.machine_overhead * jf.machine_size)

    def observed_time(self, jf: JobRuntimeFeatures, rng: np.random.Generator) -> float:
        return self.base_time(jf) * jitter(rng, self.noise)


def jitter(rng: np.random.Generator, noise: float) -> float:
    """Multiplicative noise factor; exactly 1.0 when noise is zero (no draw is consumed)."""
    if noise <= 0:
        return 1.0
    return 1.0 + float(rng.uniform(-noise, noise))


# --- model files ---

def report_to_dict(report: FitReport) -> dict:
    return {
        'feature_names': list(report.model.feature_names),
        'terms': [[a, b] for a, b in report.model.terms],
        'train_pearson': report.train_pearson,
        'test_pearson': report.test_pearson,
        'split_seed': report.split_seed,
        'train_fraction': report.train_fraction,
        'iterations': report.iterations,
    }


def save_model(report: FitReport, path) -> Path:
    path = write_json(path, report_to_dict(report))
    logger.info(f"Saved model ({', '.join(report.model.feature_names)}) to {path}")
    return path


def load_model(path) -> FitReport:
    data = read_json(path)
    try:
        model = ProductLinearModel(
            terms=tuple((float(a), float(b)) for a, b in data['terms']),
            feature_names=tuple(data['feature_names']),
        )
        return FitReport(
            model=model,
            train_pearson=float(data['train_pearson']),
            test_pearson=float(data['test_pearson']),
            split_seed=int(data['split_seed']),
            train_fraction=float(data.get('train_fraction', DEFAULT_TRAIN_FRACTION)),
            iterations=int(data.get('iterations', 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"{path}: malformed model file: {e!r}") from e
