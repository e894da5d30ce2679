"""
Regular LDPC codes with sum-product decoding.

Codes are built by placing edges column by column at random among the
check nodes with spare capacity, skipping choices that would close a
4-cycle, and resampling until the parity-check matrix has full rank. The encoder is systematic
after a column permutation found by Gaussian elimination over GF(2).

LLR convention: positive means bit 0.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import ConstructionError, InvalidInputError

__all__ = [
    "LdpcCode",
    "DecodeResult",
    "build_code",
    "encode",
    "decode_spa",
    "syndrome",
    "write_alist",
    "read_alist",
    "LLR_CLIP",
]

LLR_CLIP = 60.0
_TANH_LIMIT = 1.0 - 1e-15


@dataclass(frozen=True)
class LdpcCode:
    """Parity-check matrix ``H_pc`` (m x n, uint8), systematic generator ``G``
    (k x n) and the positions of the information bits inside a codeword."""

    H_pc: np.ndarray
    G: np.ndarray
    info_positions: np.ndarray
    column_weight: int
    row_weight: int
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return self.H_pc.shape[1]

    @property
    def k(self) -> int:
        return self.G.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n


@dataclass
class DecodeResult:
    bits: np.ndarray
    iterations_used: np.ndarray
    syndrome_ok: np.ndarray
    posterior: np.ndarray


def _gf2_rref(H: np.ndarray):
    """Row-reduce a copy of ``H`` over GF(2). Returns (R, pivot_columns)."""
    R = H.copy().astype(np.uint8)
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.nonzero(R[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        others = np.nonzero(R[:, col])[0]
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    return R[:row], np.array(pivots, dtype=int)


def _has_four_cycle(H: np.ndarray) -> bool:
    overlap = H.astype(np.int32) @ H.T.astype(np.int32)
    np.fill_diagonal(overlap, 0)
    return bool(np.any(overlap > 1))


def _progressive_matrix(n: int, m: int, wc: int, wr: int, rng: np.random.Generator):
    """Place edges column by column; return None on a dead end.

    Each column takes ``wc`` checks with spare capacity, preferring the
    emptiest ones, such that no two chosen checks already share a variable
    (which would close a 4-cycle).
    """
    H = np.zeros((m, n), dtype=np.uint8)
    spare = np.full(m, wr)
    linked = np.zeros((m, m), dtype=bool)  # checks sharing some variable
    for v in rng.permutation(n):
        chosen = []
        allowed = spare > 0
        for _ in range(wc):
            cand = np.nonzero(allowed)[0]
            if cand.size == 0:
                return None
            best = cand[spare[cand] == spare[cand].max()]
            c = int(rng.choice(best))
            chosen.append(c)
            allowed &= ~linked[c]
            allowed[c] = False
        H[chosen, v] = 1
        spare[chosen] -= 1
        idx = np.array(chosen)
        linked[np.ix_(idx, idx)] = True
    return H


def build_code(
    n: int = 512,
    rate: float = 0.5,
    column_weight: int = 3,
    seed: int = 0,
    max_tries: int = 50,
) -> LdpcCode:
    """Regular (column_weight, column_weight / (1 - rate)) LDPC code of length ``n``."""
    m_f = n * (1.0 - rate)
    m = int(round(m_f))
    if abs(m - m_f) > 1e-9 or m < 1:
        raise InvalidInputError(f"n (1 - R) must be a positive integer, got {m_f}")
    if not 1 <= column_weight <= m:
        raise InvalidInputError(f"column_weight must lie in [1, {m}], got {column_weight}")
    if (column_weight * n) % m:
        raise InvalidInputError(f"column_weight * n = {column_weight * n} not divisible by {m}")
    wr = column_weight * n // m
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        H = _progressive_matrix(n, m, column_weight, wr, rng)
        if H is not None and not _has_four_cycle(H):
            R, pivots = _gf2_rref(H)
            if pivots.size == m:
                break
    else:
        raise ConstructionError(
            f"no full-rank 4-cycle-free ({column_weight},{wr}) code of length {n} "
            f"found in {max_tries} tries (seed={seed})"
        )
    info = np.setdiff1d(np.arange(n), pivots)
    # R = [I | P] on (pivots, info) columns, so parity bits = P @ info bits
    P = R[:, info]
    k = n - m
    G = np.zeros((k, n), dtype=np.uint8)
    G[:, info] = np.eye(k, dtype=np.uint8)
    G[:, pivots] = P.T
    return LdpcCode(H, G, info, column_weight, wr, seed)


def encode(code: LdpcCode, info_bits) -> np.ndarray:
    """Codewords for ``info_bits`` of shape (k,) or (B, k)."""
    u = np.asarray(info_bits, dtype=np.uint8)
    if u.shape[-1] != code.k:
        raise InvalidInputError(f"expected {code.k} information bits, got {u.shape[-1]}")
    return ((u.astype(np.int64) @ code.G) % 2).astype(np.uint8)


def syndrome(code: LdpcCode, bits) -> np.ndarray:
    return ((np.asarray(bits, dtype=np.int64) @ code.H_pc.T) % 2).astype(np.uint8)


def _edges(code: LdpcCode):
    rows, cols = np.nonzero(code.H_pc)  # row-major: grouped by check
    by_var = np.lexsort((rows, cols))  # edge ids grouped by variable
    return rows, cols, by_var


def decode_spa(code: LdpcCode, llrs, max_iter: int = 50) -> DecodeResult:
    """Flooding log-domain sum-product decoding (tanh rule).

    ``llrs`` has shape (n,) or (B, n) and is clipped to +-60. Each codeword
    stops updating once its syndrome is satisfied, so results do not
    depend on which other codewords share the batch.
    """
    L = np.asarray(llrs, dtype=float)
    single = L.ndim == 1
    L = np.atleast_2d(L)
    if L.shape[-1] != code.n:
        raise InvalidInputError(f"expected {code.n} LLRs, got {L.shape[-1]}")
    if not np.all(np.isfinite(L)):
        raise InvalidInputError("LLRs must be finite")
    L = np.clip(L, -LLR_CLIP, LLR_CLIP)
    B = L.shape[0]
    m, n = code.H_pc.shape
    wr, wc = code.row_weight, code.column_weight
    rows, cols, by_var = _edges(code)
    H_T = code.H_pc.T.astype(np.int64)

    c2v = np.zeros((B, rows.size))
    posterior = L.copy()
    bits = (posterior < 0).astype(np.uint8)
    done = ~np.any((bits.astype(np.int64) @ H_T) % 2, axis=1)
    iters = np.zeros(B, dtype=int)
    for it in range(1, max_iter + 1):
        active = np.nonzero(~done)[0]
        if active.size == 0:
            break
        v2c = posterior[active][:, cols] - c2v[active]
        t = np.tanh(np.clip(v2c, -LLR_CLIP, LLR_CLIP) / 2.0).reshape(-1, m, wr)
        sign = np.where(t < 0, -1.0, 1.0)
        mag = np.log(np.maximum(np.abs(t), 1e-300))
        # leave-one-out product over the other edges of each check
        prod_sign = np.prod(sign, axis=2, keepdims=True) * sign
        prod_mag = np.exp(np.sum(mag, axis=2, keepdims=True) - mag)
        c2v_new = 2.0 * np.arctanh(np.clip(prod_sign * prod_mag, -_TANH_LIMIT, _TANH_LIMIT))
        c2v[active] = c2v_new.reshape(active.size, -1)
        incoming = c2v[active][:, by_var].reshape(active.size, n, wc).sum(axis=2)
        posterior[active] = L[active] + incoming
        bits[active] = posterior[active] < 0
        iters[active] = it
        done[active] = ~np.any((bits[active].astype(np.int64) @ H_T) % 2, axis=1)
    res = DecodeResult(bits=bits, iterations_used=iters, syndrome_ok=done, posterior=posterior)
    if single:
        res = DecodeResult(bits[0], iters[0], bool(done[0]), posterior[0])
    return res


def write_alist(code_or_H, path) -> None:
    """Write a parity-check matrix in MacKay's alist format."""
    H = code_or_H.H_pc if isinstance(code_or_H, LdpcCode) else np.asarray(code_or_H)
    m, n = H.shape
    col_deg = H.sum(axis=0).astype(int)
    row_deg = H.sum(axis=1).astype(int)
    lines = [f"{n} {m}", f"{col_deg.max()} {row_deg.max()}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for j in range(n):
        idx = list(np.nonzero(H[:, j])[0] + 1)
        lines.append(" ".join(map(str, idx + [0] * (col_deg.max() - len(idx)))))
    for i in range(m):
        idx = list(np.nonzero(H[i])[0] + 1)
        lines.append(" ".join(map(str, idx + [0] * (row_deg.max() - len(idx)))))
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> np.ndarray:
    """Read an alist file into a dense uint8 parity-check matrix."""
    tokens = Path(path).read_text().split("\n")
    n, m = map(int, tokens[0].split())
    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for idx in map(int, tokens[4 + j].split()):
            if idx:
                H[idx - 1, j] = 1
    return H
