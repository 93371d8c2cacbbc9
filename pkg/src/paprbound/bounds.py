"""CCDF bounds on peak envelope power.

The chain runs: envelope peak -> shift-correlation energy (Cauchy-
Schwarz) -> quartic spectral sums -> Markov inequality on the fourth
moment.  On top of that sit a Gaussian-input closed form (covariance
traces), a Chernoff/Hoeffding exponential bound for codebooks with
compact support, and the Jensen floor that limits how far unitary
transforms can push the quartic statistic once subset second moments
are white.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Codebook, QamConstellation
from .spectral import SpectralBasis, quartic_sum
from .waveform import linear_to_db

PSD_TOLERANCE = 1e-10


def r_statistic(codebook: Codebook, basis: SpectralBasis, unitaries=None) -> float:
    """Quartic-sum statistic R of the (optionally transformed) codebook.

    R = K(2K-1)/(2|C|) * sum over subsets n and codewords c in subset n
    of quartic_sum(c, basis, W_n); the identity transform is used when
    no unitaries are given.  This is the statistic every CCDF bound
    here is written in, and the quantity the unitary optimizer drives
    down.
    """
    k = basis.size
    if codebook.k_carriers != k:
        raise ValueError(f"codebook K={codebook.k_carriers} does not match basis K={k}")
    matrices = None
    if unitaries is not None:
        matrices = unitaries.matrices if hasattr(unitaries, "matrices") else np.asarray(unitaries)
        if len(matrices) != codebook.n_subsets:
            raise ValueError(f"{len(matrices)} transforms for {codebook.n_subsets} subsets")
    total = 0.0
    for n, block in enumerate(codebook.subsets()):
        w = None if matrices is None else matrices[n]
        total += quartic_sum(block, basis, w).sum()
    return k * (2 * k - 1) / (2.0 * codebook.size) * total


def markov_ccdf_bound(r_value: float, p_av: float, gamma_grid: np.ndarray) -> np.ndarray:
    """Fourth-moment Markov bound R / (P_av^2 gamma^2), reported raw.

    Values above 1 are kept as-is; they are vacuous but preserve the
    1/gamma^2 shape.
    """
    if p_av <= 0:
        raise ValueError("p_av must be positive")
    grid = np.asarray(gamma_grid, dtype=float)
    return r_value / (p_av**2 * grid**2)


def chernoff_objective(s, r_value: float, a: float, b: float, p_av: float, gamma: float):
    """Exponent -s(P_av^2 gamma^2 - R) + (b^2 - a^2) s^2 / 8 of the
    Chernoff bound before optimizing s."""
    excess = p_av**2 * gamma**2 - r_value
    return -s * excess + (b**2 - a**2) * np.asarray(s, dtype=float) ** 2 / 8.0


def optimal_chernoff_s(r_value: float, a: float, b: float, p_av: float, gamma: float) -> float:
    """Minimizer s* = 4 (P_av^2 gamma^2 - R) / (b^2 - a^2) of the
    Chernoff exponent; positive exactly on the validity region."""
    return 4.0 * (p_av**2 * gamma**2 - r_value) / (b**2 - a**2)


def hoeffding_ccdf_bound(
    r_value: float,
    a: float,
    b: float,
    p_av: float,
    gamma_grid: np.ndarray,
    squared_range: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Exponential CCDF bound exp(-2 (P_av^2 gamma^2 - R)^2 / (b^2 - a^2)).

    Valid only where P_av^2 gamma^2 > R; invalid grid points get NaN and
    a False flag.  ``a`` and ``b`` bound the peak envelope power over
    the codebook (a <= max_t |s(t)|^2 <= b for every codeword).

    With ``squared_range=True`` the denominator becomes (b^2 - a^2)^2,
    the width the standard Hoeffding lemma yields for a variable
    supported on [a^2, b^2]; the default unsquared width is the form
    whose optimizing s is ``optimal_chernoff_s``.
    """
    if not b > a >= 0:
        raise ValueError("endpoints must satisfy b > a >= 0")
    if p_av <= 0:
        raise ValueError("p_av must be positive")
    grid = np.asarray(gamma_grid, dtype=float)
    excess = p_av**2 * grid**2 - r_value
    valid = excess > 0
    width = (b**2 - a**2) ** 2 if squared_range else b**2 - a**2
    values = np.full(grid.shape, np.nan)
    values[valid] = np.exp(-2.0 * excess[valid] ** 2 / width)
    return values, valid


def qam_endpoints(constellation: QamConstellation, k_carriers: int) -> tuple[float, float]:
    """Envelope-power endpoints (0, 2 K^2 D^2 (sqrt(M) - 1)^2) for
    square M-QAM; b is the squared l1-norm cap of the largest codeword."""
    d = constellation.scale
    m = constellation.order
    return 0.0, 2.0 * k_carriers**2 * d**2 * (np.sqrt(m) - 1.0) ** 2


def codebook_endpoints(codebook: Codebook) -> tuple[float, float]:
    """l2-based endpoints a = min ||c||^2, b = K max ||c||^2.

    Conservative by the norm sandwich ||c||^2 <= max|s|^2 <= K ||c||^2,
    and invariant under unitary transforms of the codewords.
    """
    norms = (np.abs(codebook.symbols) ** 2).sum(axis=1)
    return float(norms.min()), float(codebook.k_carriers * norms.max())


def gaussian_ccdf_bound(
    cov: np.ndarray, basis: SpectralBasis, gamma_grid: np.ndarray
) -> np.ndarray:
    """CCDF bound for zero-mean complex Gaussian codewords with the
    given covariance.

    3 K (2K-1) / (2 P_av^2 gamma^2) * sum_k Tr(C_k cov)^2 +
    Tr(C_hat_k cov)^2, with P_av = Tr(cov).
    """
    sigma = np.asarray(cov, dtype=np.complex128)
    k = basis.size
    if sigma.shape != (k, k):
        raise ValueError(f"covariance must be {k}x{k}")
    eigs = np.linalg.eigvalsh(sigma)
    if eigs.min() < -PSD_TOLERANCE:
        raise ValueError(f"covariance not PSD: min eigenvalue {eigs.min():.3e}")
    p_av = float(np.trace(sigma).real)
    t_a = np.einsum("ki,ij,kj->k", basis.v, sigma, basis.v.conj()).real
    t_b = np.einsum("ki,ij,kj->k", basis.v_hat, sigma, basis.v_hat.conj()).real
    grid = np.asarray(gamma_grid, dtype=float)
    return (
        3.0 * k * (2 * k - 1) / (2.0 * p_av**2 * grid**2) * ((t_a**2).sum() + (t_b**2).sum())
    )


def real_embedding(z: np.ndarray) -> np.ndarray:
    """Real 2Kx2K (or 2K-vector) embedding [[Re, -Im], [Im, Re]]."""
    z = np.asarray(z)
    if z.ndim == 1:
        return np.concatenate([z.real, z.imag])
    return np.block([[z.real, -z.imag], [z.imag, z.real]])


def gaussian_quartic_moment(g: np.ndarray, cov: np.ndarray) -> tuple[float, float]:
    """Exact value and trace bound of E[(c* G c)^2] for c ~ CN(0, cov).

    exact = (1/4) [Tr(T(G) T(cov))^2 + 2 Tr(T(G) T(cov) T(G) T(cov))]
    with T the real embedding; bound = 3 Tr(G cov)^2, and
    exact <= bound always holds for PSD inputs.
    """
    g = np.asarray(g, dtype=np.complex128)
    cov = np.asarray(cov, dtype=np.complex128)
    if g.shape != cov.shape or g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("g and cov must be square matrices of equal size")
    for name, mat in (("g", g), ("cov", cov)):
        eigs = np.linalg.eigvalsh(mat)
        if eigs.min() < -PSD_TOLERANCE:
            raise ValueError(f"{name} not PSD: min eigenvalue {eigs.min():.3e}")
    tg = real_embedding(g)
    tc = real_embedding(cov)
    prod = tg @ tc
    exact = 0.25 * (np.trace(prod) ** 2 + 2.0 * np.trace(prod @ prod))
    bound = 3.0 * np.trace(g @ cov).real ** 2
    return float(exact), float(bound)


@dataclass(frozen=True)
class BoundReport:
    """Markov and Hoeffding bound values over a gamma grid, with the
    statistics they were computed from."""

    gamma: np.ndarray
    markov: np.ndarray
    hoeffding: np.ndarray
    hoeffding_valid: np.ndarray
    r_value: float
    a: float
    b: float
    p_av: float
    k_carriers: int
    n_subsets: int

    def write_csv(self, path: str | Path) -> None:
        """CSV columns gamma_db, markov, hoeffding, hoeffding_valid plus
        a JSON sidecar with the scalar statistics."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["gamma_db", "markov", "hoeffding", "hoeffding_valid"])
            for g, mk, hf, ok in zip(self.gamma, self.markov, self.hoeffding, self.hoeffding_valid):
                writer.writerow(
                    [
                        f"{linear_to_db(g):.17g}",
                        f"{mk:.17g}",
                        f"{hf:.17g}" if ok else "nan",
                        "true" if ok else "false",
                    ]
                )
        sidecar = {
            "R": self.r_value,
            "a": self.a,
            "b": self.b,
            "p_av": self.p_av,
            "K": self.k_carriers,
            "N": self.n_subsets,
        }
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")


def bound_report(
    codebook: Codebook,
    basis: SpectralBasis,
    gamma_grid: np.ndarray,
    unitaries=None,
) -> BoundReport:
    """Evaluate the Markov and Hoeffding bounds for a codebook, using
    the l2-based endpoints (unitary transforms leave them unchanged)."""
    grid = np.asarray(gamma_grid, dtype=float)
    r = r_statistic(codebook, basis, unitaries)
    a, b = codebook_endpoints(codebook)
    markov = markov_ccdf_bound(r, codebook.p_av, grid)
    hoeffding, valid = hoeffding_ccdf_bound(r, a, b, codebook.p_av, grid)
    return BoundReport(
        gamma=grid,
        markov=markov,
        hoeffding=hoeffding,
        hoeffding_valid=valid,
        r_value=r,
        a=a,
        b=b,
        p_av=codebook.p_av,
        k_carriers=codebook.k_carriers,
        n_subsets=codebook.n_subsets,
    )
