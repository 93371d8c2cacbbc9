"""Constellations, codebooks, and deterministic codebook generation.

A codeword is a length-K complex vector of subcarrier symbols (symbol
duration normalized to 1).  A codebook is a stack of codewords together
with a partition into consecutive, disjoint subsets and the empirical
average power over the whole book.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CODEBOOK_FORMAT = "paprbound/codebook"
FORMAT_VERSION = 1


def _gray(i: np.ndarray | int):
    return i ^ (i >> 1)


def _inverse_gray(n_codes: int) -> np.ndarray:
    """Lookup table mapping a Gray code to its level position."""
    table = np.empty(n_codes, dtype=np.int64)
    table[_gray(np.arange(n_codes))] = np.arange(n_codes)
    return table


@dataclass(frozen=True)
class QamConstellation:
    """Square M-QAM constellation with a per-axis Gray bit mapping.

    Points live on the grid ``scale * ((2*m1 - 1) + 1j*(2*m2 - 1))`` for
    ``m1, m2 in {-side/2 + 1, ..., side/2}``.  A symbol index carries
    ``log2(M)`` bits, the high half Gray-coding the in-phase level and
    the low half the quadrature level, so neighbouring points differ in
    exactly one bit.

    Attributes
    ----------
    order : int
        Constellation size M; a perfect square with an even side > 1.
    scale : float
        Half the minimum distance between points.  The default
        ``sqrt(3 / (2*(M - 1)))`` normalizes the mean symbol power to 1.
    points : np.ndarray
        (M,) complex points indexed by symbol index.
    """

    order: int
    scale: float
    points: np.ndarray = field(repr=False)
    side: int
    bits_per_symbol: int

    @classmethod
    def square(cls, order: int, scale: float | None = None) -> "QamConstellation":
        side = int(round(np.sqrt(order)))
        if side * side != order or side < 2 or side % 2 != 0:
            raise ValueError(f"order must be a perfect square with even side > 1, got {order}")
        if scale is None:
            scale = float(np.sqrt(3.0 / (2.0 * (order - 1))))
        if scale <= 0:
            raise ValueError("scale must be positive")
        axis_bits = side.bit_length() - 1
        levels = scale * (2.0 * np.arange(side) - side + 1)  # ascending odd multiples
        pos = _inverse_gray(side)
        idx = np.arange(order)
        i_level = levels[pos[idx >> axis_bits]]
        q_level = levels[pos[idx & (side - 1)]]
        points = i_level + 1j * q_level
        return cls(
            order=order,
            scale=float(scale),
            points=points,
            side=side,
            bits_per_symbol=2 * axis_bits,
        )

    def demap(self, symbols: np.ndarray) -> np.ndarray:
        """Nearest-point decision, returning symbol indices.

        For a square grid the per-axis slicer is exact minimum-distance
        demapping.
        """
        x = np.asarray(symbols)
        axis_bits = self.side.bit_length() - 1
        li = self._axis_level(x.real)
        lq = self._axis_level(x.imag)
        return (_gray(li) << axis_bits) | _gray(lq)

    def _axis_level(self, value: np.ndarray) -> np.ndarray:
        pos = np.rint((value / self.scale + self.side - 1) / 2.0).astype(np.int64)
        return np.clip(pos, 0, self.side - 1)

    def indices_to_bits(self, indices: np.ndarray) -> np.ndarray:
        """Unpack symbol indices to bits, MSB first, shape (..., bits)."""
        idx = np.asarray(indices)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return (idx[..., None] >> shifts) & 1

    def bits_to_indices(self, bits: np.ndarray) -> np.ndarray:
        b = np.asarray(bits)
        if b.shape[-1] != self.bits_per_symbol:
            raise ValueError(f"expected {self.bits_per_symbol} bits per symbol")
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return (b << shifts).sum(axis=-1)

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def validate_codeword(c: np.ndarray) -> np.ndarray:
    """Check the codeword contract: 1-D, length >= 2, all entries finite."""
    x = np.asarray(c, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("codeword must be a 1-D vector with at least 2 symbols")
    if not np.all(np.isfinite(x.view(np.float64))):
        raise ValueError("codeword contains non-finite entries")
    return x


@dataclass(frozen=True)
class Codebook:
    """A stack of codewords with a consecutive-block subset partition.

    Attributes
    ----------
    symbols : np.ndarray
        (count, K) complex codewords, one per row.
    subset_sizes : tuple[int, ...]
        Sizes of the N consecutive blocks; they sum to count.
    p_av : float
        Empirical mean of the squared l2 norm over the codebook.
    """

    symbols: np.ndarray = field(repr=False)
    subset_sizes: tuple[int, ...]
    p_av: float
    seed: int | None = None
    qam_order: int | None = None
    qam_scale: float | None = None

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.complex128)
        if sym.ndim != 2 or sym.shape[0] < 1:
            raise ValueError("symbols must be a non-empty (count, K) array")
        if sym.shape[1] < 2:
            raise ValueError("carrier count K must be at least 2")
        if not np.all(np.isfinite(sym.view(np.float64))):
            raise ValueError("codebook contains non-finite entries")
        object.__setattr__(self, "symbols", sym)
        sizes = tuple(int(s) for s in self.subset_sizes)
        if any(s <= 0 for s in sizes) or sum(sizes) != sym.shape[0]:
            raise ValueError("subset sizes must be positive and sum to the codebook size")
        object.__setattr__(self, "subset_sizes", sizes)
        p_av = float(np.mean(np.abs(sym) ** 2) * sym.shape[1])
        if abs(p_av - self.p_av) > 1e-12 * max(1.0, p_av):
            raise ValueError("stored p_av does not match the codewords")
        if p_av <= 0:
            raise ValueError("average power must be positive")

    @classmethod
    def from_symbols(cls, symbols: np.ndarray, n_subsets: int, **meta) -> "Codebook":
        sym = np.asarray(symbols, dtype=np.complex128)
        count = sym.shape[0]
        if count % n_subsets != 0:
            raise ValueError(f"codebook size {count} not divisible by {n_subsets} subsets")
        sizes = (count // n_subsets,) * n_subsets
        p_av = float(np.mean(np.abs(sym) ** 2) * sym.shape[1])
        return cls(symbols=sym, subset_sizes=sizes, p_av=p_av, **meta)

    @property
    def size(self) -> int:
        return self.symbols.shape[0]

    @property
    def k_carriers(self) -> int:
        return self.symbols.shape[1]

    @property
    def n_subsets(self) -> int:
        return len(self.subset_sizes)

    def subset(self, n: int) -> np.ndarray:
        """Rows of subset ``n`` (0-based)."""
        if not 0 <= n < self.n_subsets:
            raise ValueError(f"subset index {n} out of range [0, {self.n_subsets})")
        start = sum(self.subset_sizes[:n])
        return self.symbols[start : start + self.subset_sizes[n]]

    def subsets(self):
        return [self.subset(n) for n in range(self.n_subsets)]


def generate_codebook(
    constellation: QamConstellation,
    k_carriers: int,
    count: int,
    n_subsets: int,
    seed: int,
) -> Codebook:
    """Draw ``count`` codewords i.i.d. uniform over the constellation.

    The partition assigns consecutive blocks of ``count / n_subsets``
    codewords to each subset.  The same seed reproduces the codebook
    bit for bit.
    """
    if k_carriers < 2:
        raise ValueError("carrier count K must be at least 2")
    if count % n_subsets != 0:
        raise ValueError(f"count {count} not divisible by n_subsets {n_subsets}")
    rng = np.random.default_rng(seed % (1 << 64))
    idx = rng.integers(0, constellation.order, size=(count, k_carriers))
    symbols = constellation.points[idx]
    return Codebook.from_symbols(
        symbols,
        n_subsets,
        seed=seed,
        qam_order=constellation.order,
        qam_scale=constellation.scale,
    )


def subset_gram(codebook: Codebook, n: int) -> np.ndarray:
    """Empirical second-moment matrix of subset ``n``.

    Returns the Hermitian positive semidefinite average of the outer
    products c c* over the subset.
    """
    block = codebook.subset(n)
    return block.T @ block.conj() / block.shape[0]


def save_codebook(codebook: Codebook, path: str | Path) -> None:
    """Write a codebook file: one JSON header line, then row-major
    (re, im) float64 pairs."""
    header = {
        "format": CODEBOOK_FORMAT,
        "version": FORMAT_VERSION,
        "k_carriers": codebook.k_carriers,
        "count": codebook.size,
        "n_subsets": codebook.n_subsets,
        "subset_sizes": list(codebook.subset_sizes),
        "p_av": codebook.p_av,
        "seed": codebook.seed,
        "qam_order": codebook.qam_order,
        "qam_scale": codebook.qam_scale,
    }
    payload = np.empty((codebook.size, codebook.k_carriers, 2), dtype="<f8")
    payload[..., 0] = codebook.symbols.real
    payload[..., 1] = codebook.symbols.imag
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())


def load_codebook(path: str | Path) -> Codebook:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: not a codebook file ({exc})") from exc
    if header.get("format") != CODEBOOK_FORMAT:
        raise ValueError(f"{path}: unexpected format {header.get('format')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
    count, k = int(header["count"]), int(header["k_carriers"])
    expected = count * k * 2 * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f8").reshape(count, k, 2)
    symbols = flat[..., 0] + 1j * flat[..., 1]
    return Codebook(
        symbols=symbols,
        subset_sizes=tuple(header["subset_sizes"]),
        p_av=float(header["p_av"]),
        seed=header.get("seed"),
        qam_order=header.get("qam_order"),
        qam_scale=header.get("qam_scale"),
    )
