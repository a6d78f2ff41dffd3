"""Nonnegative sparse coding of load profiles against an over-complete dictionary.

A batch ``y`` (t slots) is represented as ``y ~ B a`` where ``B`` is a t-by-n
nonnegative dictionary with unit-norm columns, n > t, and ``a >= 0`` is sparse.
Per batch the activation solves

    minimize  ||y - B a||_2^2 + lam * ||a||_1   over  a >= 0

and the dictionary is trained by alternating that solve with exact
per-column updates of B projected onto the nonnegative unit ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._nnlasso import cd_solve, hals_pass, kkt_violation
from ._rng import derive_rng
from .meterdata import ReadingBatch

DICT_FILE_MAGIC = "LOADVEIL-DICT"
ZERO_TOL = 1e-10

INIT_MODES = ("data_segments", "random")


class DivergenceError(RuntimeError):
    """Training produced non-finite values; the run is aborted."""


@dataclass(frozen=True)
class Dictionary:
    """Nonnegative t-by-n basis matrix; every column has norm in (0, 1]."""

    basis: np.ndarray

    def __post_init__(self):
        arr = np.array(self.basis, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"basis must be a nonempty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("basis entries must be finite")
        if np.any(arr < 0):
            raise ValueError("basis entries must be nonnegative")
        norms = np.linalg.norm(arr, axis=0)
        if np.any(norms <= 0):
            raise ValueError(f"zero columns at {np.flatnonzero(norms <= 0).tolist()}")
        if np.any(norms > 1 + 1e-9):
            raise ValueError(f"column norms must be <= 1, max {norms.max()}")
        arr.setflags(write=False)
        object.__setattr__(self, "basis", arr)

    @property
    def t(self) -> int:
        return self.basis.shape[0]

    @property
    def n(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class Activation:
    """Nonnegative coefficient vector of length n (sparse in practice)."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"coeffs must be a nonempty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coeffs must be finite")
        if np.any(arr < 0):
            raise ValueError(f"coeffs must be nonnegative (min {arr.min()})")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def n(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True)
class TrainingConfig:
    """Dictionary-training knobs.

    ``sparsity_weight`` is the L1 weight; None picks 0.01 * max|B0^T y| over
    the training set at the initial dictionary. ``sigma`` is an optional
    reconstruction-norm bound checked after the fact, never enforced in the
    solve.
    """

    n: int
    sparsity_weight: float | None = None
    max_outer_iters: int = 500
    tol: float = 1e-6
    sigma: float | None = None
    seed: int = 0
    init_mode: str = "data_segments"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.sparsity_weight is not None and not self.sparsity_weight >= 0:
            raise ValueError(f"sparsity_weight must be >= 0, got {self.sparsity_weight}")
        if self.max_outer_iters < 0:
            raise ValueError(f"max_outer_iters must be >= 0, got {self.max_outer_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.sigma is not None and not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")


@dataclass(frozen=True)
class TrainingResult:
    """Trained dictionary plus the end-of-iteration objective trace."""

    dictionary: Dictionary
    objectives: tuple[float, ...]
    n_iters: int
    converged: bool
    sparsity_weight: float


def _as_values(y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"batch values must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("batch values must be finite")
    return arr


def _check_dims(y: np.ndarray, dictionary: Dictionary, activation: Activation | None = None):
    if y.size != dictionary.t:
        raise ValueError(f"batch length {y.size} does not match dictionary t={dictionary.t}")
    if activation is not None and activation.n != dictionary.n:
        raise ValueError(
            f"activation length {activation.n} does not match dictionary n={dictionary.n}")


def objective(y, dictionary: Dictionary, activation: Activation, sparsity_weight: float) -> float:
    """Reconstruction cost plus sparsity penalty: ||y - B a||_2^2 + lam * ||a||_1."""
    y = _as_values(y)
    _check_dims(y, dictionary, activation)
    if sparsity_weight < 0:
        raise ValueError(f"sparsity_weight must be >= 0, got {sparsity_weight}")
    r = y - dictionary.basis @ activation.coeffs
    return float(r @ r + sparsity_weight * np.abs(activation.coeffs).sum())


def kkt_scale(y, dictionary: Dictionary, sparsity_weight: float) -> float:
    """Normalization used for stationarity residuals: max(1, ||2 B^T y||_inf + lam)."""
    y = _as_values(y)
    corr = 2.0 * (dictionary.basis.T @ y)
    return float(max(1.0, np.abs(corr).max() + sparsity_weight))


def kkt_residual(y, dictionary: Dictionary, activation: Activation,
                 sparsity_weight: float) -> float:
    """Scale-normalized worst violation of the nonnegative-lasso conditions.

    With g = -2 B^T (y - B a) + lam, an exact solution has g_i = 0 wherever
    a_i > 0 and g_i >= 0 wherever a_i = 0.
    """
    y = _as_values(y)
    _check_dims(y, dictionary, activation)
    a = activation.coeffs
    g = -2.0 * (dictionary.basis.T @ (y - dictionary.basis @ a)) + sparsity_weight
    viol = np.where(a > 0, np.abs(g), np.maximum(0.0, -g))
    return float(viol.max() / kkt_scale(y, dictionary, sparsity_weight))


def _kkt_violation_vec(basis: np.ndarray, y: np.ndarray, a: np.ndarray, lam: float) -> float:
    g = -2.0 * (basis.T @ (y - basis @ a)) + lam
    return float(np.where(a > 0, np.abs(g), np.maximum(0.0, -g)).max())


def _restricted_target(sub_basis: np.ndarray, y: np.ndarray, lam: float):
    """Minimize ||y - Bs x||^2 + lam * sum(x) over unconstrained x.

    Returns ("stationary", x) with a stationary point, or ("ray", d) with a
    descent direction in null(Bs) when the L1 term is unbounded below there
    (moving along d lowers sum(x) without changing the reconstruction).
    """
    u, s, vt = np.linalg.svd(sub_basis, full_matrices=False)
    rank = s > (s[0] * 1e-12 if s.size else 0.0)
    u_r, s_r, v_r = u[:, rank], s[rank], vt[rank].T
    ones = np.ones(sub_basis.shape[1])
    null_ones = ones - v_r @ (v_r.T @ ones)
    if lam > 0 and np.linalg.norm(null_ones) > 1e-9 * np.sqrt(ones.size):
        return "ray", -null_ones
    x = v_r @ ((u_r.T @ y) / s_r - 0.5 * lam * (v_r.T @ ones) / (s_r * s_r))
    return "stationary", x


def _active_set_polish(basis: np.ndarray, y: np.ndarray, a0: np.ndarray,
                       lam: float, tol_abs: float) -> np.ndarray:
    """Active-set finish for coherent dictionaries.

    Cyclic coordinate descent creeps when near-duplicate atoms make the
    objective nearly flat across supports; this solves the restricted
    problem on the current support exactly (growing it by the
    worst-violating zero coordinate) until the first-order conditions hold.
    Every move is non-increasing in the objective, so the result can only
    improve on the iterate it starts from.
    """
    n = basis.shape[1]
    a = a0.copy()
    best = a0.copy()
    best_viol = _kkt_violation_vec(basis, y, a0, lam)
    for _ in range(2 * n + 10):
        g = -2.0 * (basis.T @ (y - basis @ a)) + lam
        viol = np.where(a > 0, np.abs(g), np.maximum(0.0, -g))
        worst = float(viol.max())
        if worst < best_viol:
            best, best_viol = a.copy(), worst
        if worst <= tol_abs:
            return a
        passive = a > 0
        entering = int(np.argmax(np.where(passive, 0.0, -g)))
        if not passive[entering] and g[entering] < 0:
            passive[entering] = True
        if not passive.any():
            return best
        for _ in range(n + 1):
            support = np.flatnonzero(passive)
            kind, x = _restricted_target(basis[:, support], y, lam)
            cur = a[support]
            if kind == "ray":
                # walk the flat direction until a coordinate leaves
                step_limit = x < 0
                if not np.any(step_limit):
                    break  # degenerate: nothing to drop, give up this round
                alpha = float(np.min(cur[step_limit] / -x[step_limit]))
                cur = np.maximum(cur + alpha * x, 0.0)
            elif np.all(x >= 0):
                a = np.zeros(n)
                a[support] = x
                break
            else:
                # backtrack toward the stationary target, dropping blockers
                with np.errstate(divide="ignore", invalid="ignore"):
                    steps = np.where(x < 0, cur / (cur - x), np.inf)
                alpha = float(min(1.0, steps.min()))
                cur = np.maximum(cur + alpha * (x - cur), 0.0)
            a = np.zeros(n)
            a[support] = cur
            passive = a > 1e-14
            if not passive.any():
                break
        else:
            return best
    return best


def infer_activation(y, dictionary: Dictionary, sparsity_weight: float = 0.0,
                     *, kkt_tol: float = 1e-9, max_sweeps: int = 20000) -> Activation:
    """Solve the nonnegative lasso for one batch.

    Runs cyclic coordinate descent along a decreasing-weight continuation
    path from the level where the zero vector is optimal down to
    ``sparsity_weight``; at weight zero this tracks the minimum-L1 branch of
    the exact-fit set. The result satisfies the first-order conditions to
    ``kkt_tol`` relative to kkt_scale.

    Parameters
    ----------
    y : array of t nonnegative readings
    dictionary : Dictionary with t rows
    sparsity_weight : L1 weight, >= 0

    Returns
    -------
    Activation of length dictionary.n
    """
    y = _as_values(y)
    _check_dims(y, dictionary)
    lam = float(sparsity_weight)
    if lam < 0:
        raise ValueError(f"sparsity_weight must be >= 0, got {lam}")

    basis = dictionary.basis
    n = dictionary.n
    bt = np.ascontiguousarray(basis.T)
    col_sq = np.einsum("ij,ij->j", basis, basis)
    if np.any(col_sq <= 0):
        raise ValueError("dictionary has a zero column")

    corr = 2.0 * (basis.T @ y)
    lam_max = float(corr.max())
    scale = max(1.0, float(np.abs(corr).max()) + lam)
    tol_abs = kkt_tol * scale

    a = np.zeros(n)
    if lam_max <= lam:
        return Activation(a)  # the zero vector already satisfies the conditions

    r = y.copy()
    n_stages = 16
    floor = lam if lam > 0 else lam_max * 1e-12
    ratio = (floor / lam_max) ** (1.0 / n_stages)
    for k in range(1, n_stages + 1):
        stage_lam = lam_max * ratio ** k
        # stage tolerance tracks the stage weight: leftover gradient residue
        # must stay well below the next stage's entry threshold, or inactive
        # coordinates pick up spurious mass the flat end of the path cannot
        # remove
        stage_tol = max(tol_abs, 1e-3 * stage_lam)
        _, stage_worst = cd_solve(bt, col_sq, a, r, stage_lam, stage_tol, 500)
        if stage_worst > stage_tol:
            break  # creeping already; smaller weights will creep too

    # target a decade below the contract tolerance, but accept a stalled
    # solve that still meets the contract: on coherent trained dictionaries
    # the flat end of the path converges very slowly past that point
    contract_abs = 1e-8 * scale
    worst = np.inf
    for budget in (1000, max_sweeps, max_sweeps):
        r = y - basis @ a  # refresh the residual: in-place updates drift
        cd_solve(bt, col_sq, a, r, lam, tol_abs, budget)
        r = y - basis @ a
        worst = kkt_violation(bt, a, r, lam)
        if worst <= tol_abs:
            break
        # coordinate descent creeps when trained atoms are nearly duplicate;
        # finish with an exact active-set solve instead of burning sweeps
        polished = _active_set_polish(basis, y, a, lam, tol_abs)
        polished_worst = _kkt_violation_vec(basis, y, polished, lam)
        if polished_worst <= worst:
            a, worst = polished, polished_worst
        if worst <= tol_abs or worst <= contract_abs:
            break
    if worst > max(tol_abs, contract_abs):
        raise RuntimeError(
            f"activation solver stalled at KKT violation {worst:.3e} "
            f"(tolerance {max(tol_abs, contract_abs):.3e})")
    return Activation(a)


def sparsity(activation: Activation, zero_tol: float = ZERO_TOL) -> float:
    """Fraction of activation entries with magnitude <= zero_tol."""
    return float(np.mean(np.abs(activation.coeffs) <= zero_tol))


def _safe_column_norms(basis: np.ndarray) -> np.ndarray:
    """Column norms computed against overflow (entries may be ~1e200)."""
    peak = np.abs(basis).max(axis=0)
    safe = np.where(peak > 0, peak, 1.0)
    return np.linalg.norm(basis / safe, axis=0) * peak


def _normalized_columns(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unit-normalize columns; all-zero columns are reseeded uniformly first."""
    basis = np.array(basis, dtype=float)
    norms = _safe_column_norms(basis)
    for j in np.flatnonzero(norms <= 0):
        col = rng.random(basis.shape[0])
        basis[:, j] = col
        norms[j] = np.linalg.norm(col)
    return basis / norms


def init_dictionary(batches: list[ReadingBatch], config: TrainingConfig) -> Dictionary:
    """Seeded initial dictionary.

    data_segments mode: concatenate all training values into one series and
    take n windows of length t starting at the seeded draws
    ``derive_rng(seed).integers(0, len(series), n)``, wrapping around the
    end. random mode: i.i.d. uniform [0, 1) entries. Columns are unit-
    normalized in both modes.
    """
    if not batches:
        raise ValueError("initialization requires at least one training batch")
    t = batches[0].t
    rng = derive_rng(config.seed)
    if config.init_mode == "random":
        basis = rng.random((t, config.n))
    else:
        series = np.concatenate([b.values for b in batches])
        starts = rng.integers(0, series.size, size=config.n)
        basis = np.stack(
            [np.take(series, np.arange(s, s + t), mode="wrap") for s in starts], axis=1)
    return Dictionary(_normalized_columns(basis, rng))


def _dictionary_update(basis: np.ndarray, ymat: np.ndarray, amat: np.ndarray,
                       max_passes: int = 4) -> np.ndarray:
    """Exact per-column updates on sum ||y - B a||^2 over {B >= 0, ||col|| <= 1}.

    Each column update minimizes the reconstruction cost exactly over the
    feasible set (hals_pass), so the cost is non-increasing. Extra passes
    sharpen the block solve; they stop early once a pass no longer helps.
    """
    basis = np.ascontiguousarray(basis)
    amat = np.ascontiguousarray(amat)
    with np.errstate(over="ignore"):  # divergent runs are caught by the trainer
        resid = np.ascontiguousarray(ymat - basis @ amat)
        arow_sq = np.einsum("ij,ij->i", amat, amat)
        prev = float((resid * resid).sum())
        for _ in range(max_passes):
            hals_pass(basis, resid, amat, arow_sq)
            cur = float((resid * resid).sum())
            if prev - cur <= 1e-4 * max(cur, 1e-30):
                break
            prev = cur
    return basis


def renormalize_columns(basis: np.ndarray, acts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescale every column to unit norm, compensating the activations.

    ``acts`` holds one activation per row (batch-major). The products B a are
    unchanged; with column norms <= 1 the compensated activations shrink, so
    the L1 term never grows. Columns must be nonzero.
    """
    norms = np.linalg.norm(basis, axis=0)
    if np.any(norms <= 0):
        raise ValueError(f"zero columns at {np.flatnonzero(norms <= 0).tolist()}")
    return basis / norms, acts * norms[None, :]


def train_dictionary(batches: list[ReadingBatch], config: TrainingConfig) -> TrainingResult:
    """Alternating minimization: activations by coordinate descent, dictionary
    by exact per-column projected updates, columns renormalized (activations
    compensated) every iteration.

    The recorded end-of-iteration objective is non-increasing by
    construction: the coordinate updates and the column updates both
    descend, and renormalizing columns up to unit norm only shrinks the
    compensated activations' L1 term. Stops when the relative decrease
    falls below ``config.tol`` or after ``config.max_outer_iters``.

    Returns
    -------
    TrainingResult
        dictionary, per-iteration objectives, iteration count, convergence
        flag, and the resolved sparsity weight.
    """
    if not batches:
        raise ValueError("training requires at least one batch")
    t = batches[0].t
    if any(b.t != t for b in batches):
        lengths = sorted({b.t for b in batches})
        raise ValueError(f"all training batches must share the same length, got {lengths}")
    if config.n <= t:
        raise ValueError(f"training needs an over-complete dictionary: n={config.n} must exceed t={t}")

    n, m = config.n, len(batches)
    basis = np.array(init_dictionary(batches, config).basis)
    reseed_rng = derive_rng(config.seed, 1)

    ys = np.ascontiguousarray(np.stack([b.values for b in batches], axis=0))  # (m, t)
    acts = np.zeros((m, n))
    ymat = ys.T

    if config.sparsity_weight is not None:
        lam = float(config.sparsity_weight)
    else:
        lam = 0.01 * float(np.abs(ys @ basis).max()) if ys.any() else 0.0

    objectives: list[float] = []
    converged = False
    prev = None
    for _ in range(config.max_outer_iters):
        # (a) per-batch activation solves, warm-started
        bt = np.ascontiguousarray(basis.T)
        col_sq = np.einsum("ij,ij->j", basis, basis)
        resid = np.ascontiguousarray(ys - acts @ basis.T)
        corr = 2.0 * np.abs(ys @ basis)
        # descent holds wherever coordinate descent stops, so the in-training
        # tolerance can stay loose; the public solver is the tight one
        for b in range(m):
            scale = max(1.0, float(corr[b].max()) + lam)
            cd_solve(bt, col_sq, acts[b], resid[b], lam, 1e-5 * scale, 500)

        # (b) dictionary update, then (c) renormalize up and compensate
        amat = acts.T
        basis = _dictionary_update(basis, ymat, amat)
        dead = np.linalg.norm(basis, axis=0) <= 1e-12
        if np.any(dead):
            for j in np.flatnonzero(dead):
                amat[j, :] = 0.0  # contribution is already negligible
                col = reseed_rng.random(t)
                basis[:, j] = col / np.linalg.norm(col)
        basis, acts = renormalize_columns(basis, acts)

        if not (np.all(np.isfinite(basis)) and np.all(np.isfinite(acts))):
            raise DivergenceError("non-finite values during dictionary training")
        with np.errstate(over="ignore"):  # overflow here IS the divergence signal
            resid = ys - acts @ basis.T
            obj = float((resid * resid).sum() + lam * np.abs(acts).sum())
        if not np.isfinite(obj):
            raise DivergenceError(f"objective diverged to {obj}")
        objectives.append(obj)
        if prev is not None and prev - obj <= config.tol * max(prev, 1e-30):
            converged = True
            break
        prev = obj

    return TrainingResult(
        dictionary=Dictionary(basis),
        objectives=tuple(objectives),
        n_iters=len(objectives),
        converged=converged,
        sparsity_weight=lam,
    )


def save_dictionary(dictionary: Dictionary, path) -> None:
    """Text format: header line, then t rows of n space-separated decimals."""
    with open(path, "w") as fh:
        fh.write(f"{DICT_FILE_MAGIC} v1 t={dictionary.t} n={dictionary.n}\n")
        for row in dictionary.basis:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_dictionary(path) -> Dictionary:
    with open(path, "r") as fh:
        header = fh.readline().split()
        if (len(header) != 4 or header[0] != DICT_FILE_MAGIC or header[1] != "v1"
                or not header[2].startswith("t=") or not header[3].startswith("n=")):
            raise ValueError(f"not a {DICT_FILE_MAGIC} v1 file: header {' '.join(header)!r}")
        try:
            t = int(header[2][2:])
            n = int(header[3][2:])
        except ValueError:
            raise ValueError(f"bad dimensions in header {' '.join(header)!r}") from None
        rows = []
        for i in range(t):
            line = fh.readline()
            if not line:
                raise ValueError(f"expected {t} rows, file ends after {i}")
            try:
                row = np.array(line.split(), dtype=float)
            except ValueError:
                raise ValueError(f"row {i + 1} contains a non-numeric entry") from None
            if row.size != n:
                raise ValueError(f"row {i + 1} has {row.size} entries, expected {n}")
            rows.append(row)
    return Dictionary(np.stack(rows, axis=0))
