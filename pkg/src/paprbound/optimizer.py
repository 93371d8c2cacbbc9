"""Descent on sets of unitary matrices that lowers the quartic statistic.

Each subset of the codebook gets its own K x K unitary W_n.  A step
moves W_n against the generalized complex gradient of the quartic
statistic restricted to that subset (evaluated per codeword with two
FFTs and a rank-one outer product) and then projects back onto the
unitary matrices, either by row-wise Gram-Schmidt or by symmetric
decorrelation (W (W W*)^{-1/2} ... the polar unitary factor).  The
batch step sums the gradient over a whole subset; the stochastic step
uses one uniformly drawn codeword per subset and iteration, with the
draw stream keyed by (seed, subset, iteration) so trajectories are
reproducible and resumable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import r_statistic
from .core import Codebook
from .spectral import SpectralBasis

UNITARY_FORMAT = "paprbound/unitary-set"
FORMAT_VERSION = 1

PROJECTIONS = ("symmetric_decorrelation", "gram_schmidt")
MODES = ("batch", "stochastic")


class RankDeficientUpdate(RuntimeError):
    """Raised when an updated matrix cannot be projected back onto the
    unitary matrices; the step size is too large."""


def _seed_key(*parts) -> list[int]:
    return [int(p) % (1 << 63) for p in parts]


def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed K x K unitary (QR of a complex Ginibre draw)."""
    z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


@dataclass(frozen=True)
class UnitarySet:
    """N unitary K x K matrices, one per codebook subset."""

    matrices: np.ndarray = field(repr=False)  # (N, K, K)
    iteration: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.complex128)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise ValueError("matrices must have shape (N, K, K)")
        object.__setattr__(self, "matrices", m)

    @classmethod
    def identity(cls, n_subsets: int, k_carriers: int) -> "UnitarySet":
        eye = np.broadcast_to(np.eye(k_carriers, dtype=np.complex128), (n_subsets, k_carriers, k_carriers))
        return cls(matrices=eye.copy())

    @classmethod
    def random(cls, n_subsets: int, k_carriers: int, rng: np.random.Generator) -> "UnitarySet":
        return cls(matrices=np.stack([random_unitary(k_carriers, rng) for _ in range(n_subsets)]))

    @property
    def n_subsets(self) -> int:
        return self.matrices.shape[0]

    @property
    def k_carriers(self) -> int:
        return self.matrices.shape[1]

    def unitarity_error(self) -> float:
        eye = np.eye(self.k_carriers)
        return max(
            float(np.linalg.norm(w @ w.conj().T - eye)) for w in self.matrices
        )

    def validate(self, tol: float = 1e-8) -> None:
        err = self.unitarity_error()
        if err > tol:
            raise ValueError(f"unitarity violated: max ||W W* - I||_F = {err:.3e} > {tol}")


@dataclass(frozen=True)
class OptimizerConfig:
    """Step size, stopping rule, projection, and draw mode.

    ``epsilon=None`` resolves to K^(-3/2) at run time.  ``stop_tol``
    bounds the Frobenius step norm max_n ||W(l+1) - W(l)||; the run also
    stops at ``max_iters``.
    """

    epsilon: float | None = None
    max_iters: int = 20000
    stop_tol: float = 1e-6
    projection: str = "symmetric_decorrelation"
    mode: str = "stochastic"
    seed: int = 0
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")

    def resolved_epsilon(self, k_carriers: int) -> float:
        return float(self.epsilon) if self.epsilon is not None else k_carriers ** -1.5


def delta_w(subset: np.ndarray, w: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    """Unscaled descent direction for one subset.

    sum over codewords c of sum_k [(c* W* C_k W c) C_k +
    (c* W* C_hat_k W c) C_hat_k] W c c*, evaluated per codeword as
    V*(|alpha|^2 alpha) c* + V_hat*(|beta|^2 beta) c* with
    alpha = V W c, beta = V_hat W c.  The generalized complex gradient
    of the subset quartic statistic is this matrix times the positive
    scalar 2 K (2K - 1) / |C|.
    """
    block = np.atleast_2d(np.asarray(subset, dtype=np.complex128))
    k = basis.size
    if block.shape[0] == 0:
        return np.zeros((k, k), dtype=np.complex128)
    if block.shape[1] != k or w.shape != (k, k):
        raise ValueError("subset and transform must match the basis size")
    u = block @ w.T
    alpha = basis.to_alpha(u)
    beta = basis.to_beta(u)
    va = basis.from_alpha(np.abs(alpha) ** 2 * alpha)
    vb = basis.from_beta(np.abs(beta) ** 2 * beta)
    return (va + vb).T @ block.conj()


def project_gram_schmidt(w: np.ndarray) -> np.ndarray:
    """Orthonormalize the rows in index order.

    Row k keeps only its component orthogonal to rows 1..k-1, then is
    normalized.  Fails loudly on rank deficiency, naming the row whose
    residual collapses.
    """
    out = np.array(w, dtype=np.complex128)
    k = out.shape[0]
    for row in range(k):
        for prev in range(row):
            out[row] -= np.vdot(out[prev], out[row]) * out[prev]
        norm = np.linalg.norm(out[row])
        if norm <= 1e-12:
            raise RankDeficientUpdate(
                f"row {row} is in the span of rows 0..{row - 1}; matrix is rank deficient"
            )
        out[row] /= norm
    return out


def project_symmetric(w: np.ndarray) -> np.ndarray:
    """Symmetric decorrelation (W W*)^{-1/2} W via eigendecomposition.

    Returns the unitary polar factor of W; idempotent on its own
    output and the identity on unitary input.
    """
    h = w @ w.conj().T
    lam, f = np.linalg.eigh(h)
    if lam.min() <= 1e-12:
        raise RankDeficientUpdate(
            f"updated matrix is near singular (min eigenvalue {lam.min():.3e}); "
            "reduce the step size epsilon"
        )
    return (f * lam**-0.5) @ f.conj().T @ w


_PROJECTORS = {
    "symmetric_decorrelation": project_symmetric,
    "gram_schmidt": project_gram_schmidt,
}


def _apply_updates(state: UnitarySet, updates, epsilon: float, projection: str):
    project = _PROJECTORS[projection]
    new = np.empty_like(state.matrices)
    norms = np.empty(state.n_subsets)
    for n, (w, dw) in enumerate(zip(state.matrices, updates)):
        new[n] = project(w - epsilon * dw)
        norms[n] = np.linalg.norm(new[n] - w)
    return UnitarySet(matrices=new, iteration=state.iteration + 1), norms


def step_batch(
    state: UnitarySet, codebook: Codebook, basis: SpectralBasis, config: OptimizerConfig
) -> tuple[UnitarySet, np.ndarray]:
    """One full-subset gradient step for every subset.

    Returns the new state and the per-subset step norms
    ||W(l+1) - W(l)||_F used by the stopping rule.
    """
    eps = config.resolved_epsilon(basis.size)
    updates = [delta_w(block, w, basis) for block, w in zip(codebook.subsets(), state.matrices)]
    return _apply_updates(state, updates, eps, config.projection)


def step_stochastic(
    state: UnitarySet, codebook: Codebook, basis: SpectralBasis, config: OptimizerConfig
) -> tuple[UnitarySet, np.ndarray]:
    """One single-codeword gradient step per subset.

    Each subset draws one codeword uniformly from its own stream,
    keyed by (seed, subset, iteration); a rerun or a resumed run
    therefore reproduces the trajectory exactly.
    """
    eps = config.resolved_epsilon(basis.size)
    updates = []
    for n, (block, w) in enumerate(zip(codebook.subsets(), state.matrices)):
        rng = np.random.default_rng(_seed_key(config.seed, n, state.iteration))
        pick = int(rng.integers(block.shape[0]))
        updates.append(delta_w(block[pick : pick + 1], w, basis))
    return _apply_updates(state, updates, eps, config.projection)


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    r_value: float
    max_step_norm: float
    wall_s: float


def run(
    codebook: Codebook,
    basis: SpectralBasis,
    config: OptimizerConfig,
    initial: UnitarySet | None = None,
) -> tuple[UnitarySet, list[TracePoint]]:
    """Iterate steps until the step norm drops below stop_tol for every
    subset or max_iters is reached.

    Returns the final state and a trace with the quartic statistic R at
    every checkpoint (start, every ``checkpoint_every`` iterations, and
    the final state).
    """
    if initial is None:
        state = UnitarySet.identity(codebook.n_subsets, basis.size)
    else:
        initial.validate()
        state = initial
    if state.n_subsets != codebook.n_subsets or state.k_carriers != basis.size:
        raise ValueError("initial unitary set does not match the codebook/basis")
    step = step_batch if config.mode == "batch" else step_stochastic
    started = time.perf_counter()
    trace = [
        TracePoint(state.iteration, r_statistic(codebook, basis, state), 0.0, 0.0)
    ]
    for _ in range(config.max_iters):
        state, norms = step(state, codebook, basis, config)
        if state.iteration % config.checkpoint_every == 0:
            trace.append(
                TracePoint(
                    state.iteration,
                    r_statistic(codebook, basis, state),
                    float(norms.max()),
                    time.perf_counter() - started,
                )
            )
        if norms.max() <= config.stop_tol:
            break
    if trace[-1].iteration != state.iteration:
        trace.append(
            TracePoint(
                state.iteration,
                r_statistic(codebook, basis, state),
                float(norms.max()),
                time.perf_counter() - started,
            )
        )
    return state, trace


def save_unitaries(
    state: UnitarySet, path: str | Path, seed: int | None = None, config_hash: str | None = None
) -> None:
    """Write a unitary-set file: JSON header line, then N row-major
    complex matrices as (re, im) float64 pairs."""
    header = {
        "format": UNITARY_FORMAT,
        "version": FORMAT_VERSION,
        "k_carriers": state.k_carriers,
        "n_subsets": state.n_subsets,
        "iteration": state.iteration,
        "seed": seed,
        "config_hash": config_hash,
    }
    payload = np.empty(state.matrices.shape + (2,), dtype="<f8")
    payload[..., 0] = state.matrices.real
    payload[..., 1] = state.matrices.imag
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())


def load_unitaries(path: str | Path, tol: float = 1e-8) -> UnitarySet:
    """Read a unitary-set file and re-validate unitarity."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: not a unitary-set file ({exc})") from exc
    if header.get("format") != UNITARY_FORMAT:
        raise ValueError(f"{path}: unexpected format {header.get('format')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
    n, k = int(header["n_subsets"]), int(header["k_carriers"])
    expected = n * k * k * 2 * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f8").reshape(n, k, k, 2)
    state = UnitarySet(matrices=flat[..., 0] + 1j * flat[..., 1], iteration=int(header["iteration"]))
    state.validate(tol)
    return state
