"""Matched-filter front end, network input features, and the exhaustive
maximum-likelihood detector used as the performance reference.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .channel import ModulationScheme, modulate

# Refuse exhaustive search beyond this many candidate vectors.
MAX_CANDIDATES = 65536

_candidate_cache: dict = {}


class DetectionResult(NamedTuple):
    symbols: np.ndarray
    bits: np.ndarray
    metric: float


class CandidateSet(NamedTuple):
    """All L^M transmit hypotheses, indexed by their bit string read as an
    integer (MSB first), which is the tie-breaking order."""

    symbols: np.ndarray  # (L^M, M) complex
    bits: np.ndarray     # (L^M, M*bits_per_symbol) int8


def candidate_set(scheme: ModulationScheme, n_tx: int) -> CandidateSet:
    """Enumerate every candidate symbol vector for an M-antenna transmitter."""
    key = (scheme.alphabet, n_tx)
    cached = _candidate_cache.get(key)
    if cached is not None:
        return cached
    n_bits = n_tx * scheme.bits_per_symbol
    count = scheme.order ** n_tx
    if count > MAX_CANDIDATES:
        raise ValueError(
            f"search space L^M = {count} exceeds cap {MAX_CANDIDATES}"
        )
    idx = np.arange(count, dtype=np.uint32)
    shifts = np.arange(n_bits - 1, -1, -1)
    bits = ((idx[:, None] >> shifts) & 1).astype(np.int8)
    symbols = modulate(bits, scheme)
    cs = CandidateSet(symbols=symbols, bits=bits)
    _candidate_cache[key] = cs
    return cs


def matched_filter(h, y) -> np.ndarray:
    """H^H y for one realization (or batched: (B,N,M), (B,N) -> (B,M))."""
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if h.ndim == 2:
        if y.shape != (h.shape[0],):
            raise ValueError(f"shape mismatch: H is {h.shape}, y is {y.shape}")
        return h.conj().T @ y
    if y.shape != h.shape[:2]:
        raise ValueError(f"shape mismatch: H batch {h.shape}, y batch {y.shape}")
    return np.einsum("bnm,bn->bm", h.conj(), y)


def gram(h) -> np.ndarray:
    """H^H H, Hermitian PSD; batched over a leading axis if present."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 2:
        return h.conj().T @ h
    return np.einsum("bnm,bnk->bmk", h.conj(), h)


def features_from_gram(g, z) -> np.ndarray:
    """Assemble the real feature vector from precomputed H^H H and H^H y.

    Layout: [Re(vec(G)); Im(vec(G)); Re(z); Im(z)] with column-major vec,
    total length 2M(M+1). Batched when g is (B, M, M) and z is (B, M).
    """
    g = np.asarray(g)
    z = np.asarray(z)
    if g.ndim == 2:
        gv = g.flatten(order="F")
        return np.concatenate([gv.real, gv.imag, z.real, z.imag])
    gv = g.transpose(0, 2, 1).reshape(g.shape[0], -1)
    return np.concatenate([gv.real, gv.imag, z.real, z.imag], axis=1)


def build_features(h, y) -> np.ndarray:
    """Network input for one received block: Gram then matched-filter parts,
    real components before imaginary ones."""
    return features_from_gram(gram(h), matched_filter(h, y))


def feature_length(n_tx: int) -> int:
    return 2 * n_tx * (n_tx + 1)


def _mlsd_metrics(g, z, cands: CandidateSet) -> np.ndarray:
    """||y - H x_c||^2 - ||y||^2 for every candidate, batched: (B, L^M).

    The common ||y||^2 offset does not affect the argmin or tie structure.
    """
    sym = cands.symbols
    gc = g @ sym.conj().T.copy()                       # (B, M, C)
    quad = np.einsum("cm,bmc->bc", sym, gc).real       # x^H G x
    lin = (z @ sym.conj().T).real                      # z^H x, conjugated below
    return quad - 2.0 * lin


def mlsd(h, y, scheme: ModulationScheme) -> DetectionResult:
    """Exhaustive minimization of ||y - Hx||^2 over all candidate vectors.

    Ties go to the lowest candidate index in lexicographic bit order. The
    returned metric is the exact residual of the winning candidate.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if h.ndim != 2 or y.shape != (h.shape[0],):
        raise ValueError(f"shape mismatch: H is {h.shape}, y is {y.shape}")
    cands = candidate_set(scheme, h.shape[1])
    g = gram(h)[None]
    z = matched_filter(h, y)[None]
    idx = int(np.argmin(_mlsd_metrics(g, z, cands)[0]))
    x_hat = cands.symbols[idx]
    resid = y - h @ x_hat
    return DetectionResult(
        symbols=x_hat,
        bits=cands.bits[idx].copy(),
        metric=float(np.real(resid.conj() @ resid)),
    )


def mlsd_bits_batch(g, z, cands: CandidateSet) -> np.ndarray:
    """Hard bit decisions for a batch of blocks from (H^H H, H^H y)."""
    idx = np.argmin(_mlsd_metrics(g, z, cands), axis=1)
    return cands.bits[idx]


def count_bit_errors(truth, decision) -> int:
    """Hamming distance between two equal-length bit vectors (or arrays)."""
    truth = np.asarray(truth)
    decision = np.asarray(decision)
    if truth.shape != decision.shape:
        raise ValueError(
            f"length mismatch: {truth.shape} vs {decision.shape}"
        )
    return int(np.count_nonzero(truth != decision))
