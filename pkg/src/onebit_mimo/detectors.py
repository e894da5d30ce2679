"""
Data detection on 1-bit observations.

Observations may be a single receive vector (length M) or a block of
vectors (M x L); every detector then returns K x L outputs. The MMSE
filters depend only on the channel and noise level, so one filter bank
serves the whole block.

LLR sign convention: ``LLR = log P(bit = 0) / P(bit = 1)``. Bit 0 maps to
the positive rail, so a positive LLR favours a positive real (or
imaginary) part.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .channel import qpsk_slice
from .exceptions import InvalidInputError, NumericalInconsistencyError
from .quantize import BussgangModel, build_bussgang_model

__all__ = [
    "LLR_CLIP",
    "DIAGONAL_LOADING",
    "LraMmseFilter",
    "SicTrace",
    "DetectionOutput",
    "detect_mrc",
    "detect_zf",
    "build_lra_mmse",
    "detect_lra_mmse",
    "sic_order_next",
    "stream_statistics",
    "soft_llr",
    "soft_residual",
    "detect_sic_hard",
    "detect_sic_soft",
    "DETECTORS",
]

LLR_CLIP = 60.0
DIAGONAL_LOADING = 1e-10
MU_TOL = 1e-8


@dataclass
class LraMmseFilter:
    W: np.ndarray
    model: BussgangModel
    H_eff: np.ndarray

    def apply(self, y_Q) -> np.ndarray:
        return self.W.conj().T @ y_Q


@dataclass
class SicTrace:
    order: List[int] = field(default_factory=list)
    symbols: List[np.ndarray] = field(default_factory=list)
    mu: List[float] = field(default_factory=list)
    eta2: List[float] = field(default_factory=list)
    residuals: List[np.ndarray] = field(default_factory=list)


@dataclass
class DetectionOutput:
    hard_symbols: np.ndarray
    llrs: Optional[np.ndarray] = None
    trace: Optional[SicTrace] = None


def _as_block(y_Q, M: int) -> Tuple[np.ndarray, bool]:
    y = np.asarray(y_Q, dtype=complex)
    single = y.ndim == 1
    y = y.reshape(M, -1) if single else y
    if y.shape[0] != M:
        raise InvalidInputError(f"observation has {y.shape[0]} rows, channel has {M}")
    return y, single


def _unblock(x: Optional[np.ndarray], single: bool):
    if x is None or not single:
        return x
    return x[:, 0] if x.ndim == 2 else x[:, 0, :]


def _energies(K: int, symbol_energy: float, per_user_energy) -> np.ndarray:
    if per_user_energy is None:
        return np.full(K, float(symbol_energy))
    return np.asarray(per_user_energy, dtype=float).reshape(K)


def _channel(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise InvalidInputError(f"H must be 2-D, got shape {H.shape}")
    return H


def detect_mrc(y_Q, H, symbol_energy: float = 1.0, per_user_energy=None) -> DetectionOutput:
    """Matched filter ``H^H y`` normalized per stream by ``||h_k||^2``, then sliced."""
    H = _channel(H)
    y, single = _as_block(y_Q, H.shape[0])
    norms = np.sum(np.abs(H) ** 2, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    x = (H.conj().T @ y) / norms[:, None]
    e = _energies(H.shape[1], symbol_energy, per_user_energy)
    return DetectionOutput(_unblock(qpsk_slice(x, e[:, None]), single))


def detect_zf(y_Q, H, symbol_energy: float = 1.0, per_user_energy=None) -> DetectionOutput:
    """Zero forcing ``(H^H H)^{-1} H^H y``, then sliced."""
    H = _channel(H)
    y, single = _as_block(y_Q, H.shape[0])
    if np.linalg.matrix_rank(H) < H.shape[1]:
        raise InvalidInputError("zero forcing needs a full column rank channel")
    x = np.linalg.lstsq(H, y, rcond=None)[0]
    e = _energies(H.shape[1], symbol_energy, per_user_energy)
    return DetectionOutput(_unblock(qpsk_slice(x, e[:, None]), single))


def _solve_loaded(C: np.ndarray, B: np.ndarray) -> np.ndarray:
    C = C + DIAGONAL_LOADING * np.eye(C.shape[0])
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(C, lower=True), B)
    except np.linalg.LinAlgError:
        return np.linalg.solve(C, B)


def _filter_from_covariance(C: np.ndarray, H_eff: np.ndarray, model: BussgangModel) -> LraMmseFilter:
    cross = model.A[:, None] * H_eff * model.user_energy[None, :]
    return LraMmseFilter(W=_solve_loaded(C, cross), model=model, H_eff=H_eff)


def build_lra_mmse(
    H,
    symbol_energy: float = 1.0,
    noise_variance: float = 1.0,
    per_user_energy=None,
    model: Optional[BussgangModel] = None,
) -> LraMmseFilter:
    """LRA-MMSE filter ``W = C_yQ^{-1} A H D`` (``D`` = per-user energies).

    ``model`` overrides the Bussgang model built from ``H``, e.g. with
    :func:`~onebit_mimo.quantize.unquantized_model`.
    """
    H = _channel(H)
    if model is None:
        model = build_bussgang_model(H, symbol_energy, noise_variance, per_user_energy)
    return _filter_from_covariance(model.C_yQ, H, model)


def stream_statistics(filt: LraMmseFilter, k: int) -> Tuple[float, float]:
    """Gain ``mu_k = Re(w_k^H A h_k)`` and noise variance ``eta_k^2 = E_k (mu_k - mu_k^2)``
    of the filter output for user ``k``."""
    A = filt.model.A
    inner = np.vdot(filt.W[:, k], A * filt.H_eff[:, k])
    mu = float(np.real(inner))
    if abs(np.imag(inner)) > 1e-6 * max(1.0, abs(mu)):
        raise NumericalInconsistencyError(f"mu_{k} has imaginary part {np.imag(inner):.3e}")
    if mu < -MU_TOL or mu > 1.0 + MU_TOL:
        raise NumericalInconsistencyError(f"mu_{k} = {mu} outside [0, 1]")
    mu = min(max(mu, 0.0), 1.0)
    energy = float(filt.model.user_energy[k])
    return mu, energy * (mu - mu * mu)


def _stream_gains(filt: LraMmseFilter) -> np.ndarray:
    A = filt.model.A
    return np.real(np.sum(filt.W.conj() * (A[:, None] * filt.H_eff), axis=0))


def sic_order_next(filt: LraMmseFilter, remaining: Sequence[int]) -> int:
    """Remaining user with the largest ``mu_k``; ties go to the lowest index."""
    remaining = sorted(remaining)
    if not remaining:
        raise InvalidInputError("no users left to order")
    mu = _stream_gains(filt)
    return max(remaining, key=lambda k: (mu[k], -k))


def soft_llr(x_tilde, mu, eta2, symbol_energy=1.0, clip: Optional[float] = None) -> np.ndarray:
    """Per-bit LLRs of Gray QPSK under ``x_tilde = mu x + z``, ``z ~ CN(0, eta2)``.

    Uniform priors. For Gray QPSK the 4-hypothesis sums factor per rail to
    ``4 mu a Re(x_tilde) / eta2`` and ``4 mu a Im(x_tilde) / eta2`` with
    ``a = sqrt(E/2)``. Output has a trailing axis of length 2.
    """
    eta2 = np.asarray(eta2, dtype=float)
    if np.any(~(eta2 > 0)):
        raise InvalidInputError("eta^2 must be positive")
    x = np.asarray(x_tilde)
    scale = 4.0 * np.asarray(mu, dtype=float) * np.sqrt(np.asarray(symbol_energy, dtype=float) / 2.0) / eta2
    llr = np.stack([scale * np.real(x), scale * np.imag(x)], axis=-1)
    if clip is not None:
        llr = np.clip(llr, -clip, clip)
    return llr


def soft_residual(y_Q, decided, H, A) -> np.ndarray:
    """``y_Q - A sum_j h_{k_j} x_{k_j}`` over decided ``(k_j, x_{k_j})`` pairs."""
    H = _channel(H)
    A = np.asarray(A, dtype=float)
    y = np.array(y_Q, dtype=complex, copy=True)
    seen = set()
    for k, x in decided:
        if k in seen:
            raise InvalidInputError(f"user {k} cancelled twice")
        seen.add(k)
        col = A * H[:, k]
        y -= np.multiply.outer(col, np.asarray(x)) if y.ndim > 1 else col * x
    return y


def _sic(y_Q, H, symbol_energy, noise_variance, per_user_energy, model, soft):
    H = _channel(H)
    M, K = H.shape
    y, single = _as_block(y_Q, M)
    if model is None:
        model = build_bussgang_model(H, symbol_energy, noise_variance, per_user_energy)
    e = model.user_energy
    A = model.A
    # parts of the stage covariance that stay frozen: A n and n_q
    fixed = model.noise_variance * np.diag(A * A) + model.C_nq
    H_bar = H.copy()
    hard = np.empty((K, y.shape[1]), dtype=complex)
    llrs = np.empty((K, y.shape[1], 2)) if soft else None
    trace = SicTrace()
    remaining = list(range(K))
    residual = y
    for _ in range(K):
        AH = A[:, None] * H_bar
        C = (AH * e) @ AH.conj().T + fixed
        filt = _filter_from_covariance(C, H_bar, model)
        k = sic_order_next(filt, remaining)
        x_tilde = filt.W[:, k].conj() @ residual
        x_hat = qpsk_slice(x_tilde, e[k])
        mu, eta2 = stream_statistics(filt, k)
        hard[k] = x_hat
        if soft:
            llrs[k] = soft_llr(x_tilde, mu, max(eta2, np.finfo(float).tiny), e[k], clip=LLR_CLIP)
        trace.order.append(k)
        trace.symbols.append(x_hat)
        trace.mu.append(mu)
        trace.eta2.append(eta2)
        trace.residuals.append(residual)
        residual = residual - np.outer(A * H[:, k], x_hat)
        H_bar[:, k] = 0.0
        remaining.remove(k)
    if single:
        trace.symbols = [s[0] for s in trace.symbols]
        trace.residuals = [r[:, 0] for r in trace.residuals]
    return DetectionOutput(_unblock(hard, single), _unblock(llrs, single), trace)


def detect_sic_hard(
    y_Q, H, symbol_energy: float = 1.0, noise_variance: float = 1.0,
    per_user_energy=None, model: Optional[BussgangModel] = None,
) -> DetectionOutput:
    """Ordered LRA-MMSE successive interference cancellation with hard decisions.

    Each stage picks the remaining user with the largest filter gain
    ``mu``, slices its filter output, subtracts ``A h_k x_k`` from the
    observation and zeroes column ``k`` of the working channel. The next
    filter uses ``C = A H_bar D H_bar^H A + sigma_n^2 A A + C_nq`` with the
    original ``A`` and ``C_nq``.
    """
    return _sic(y_Q, H, symbol_energy, noise_variance, per_user_energy, model, soft=False)


def detect_sic_soft(
    y_Q, H, symbol_energy: float = 1.0, noise_variance: float = 1.0,
    per_user_energy=None, model: Optional[BussgangModel] = None,
) -> DetectionOutput:
    """As :func:`detect_sic_hard` but also emits clipped per-bit LLRs (K x 2, or K x L x 2).

    Cancellation still uses the sliced symbols.
    """
    return _sic(y_Q, H, symbol_energy, noise_variance, per_user_energy, model, soft=True)


def detect_lra_mmse(
    y_Q, H, symbol_energy: float = 1.0, noise_variance: float = 1.0,
    per_user_energy=None, model: Optional[BussgangModel] = None,
) -> DetectionOutput:
    """Linear LRA-MMSE detection with hard symbols and clipped LLRs."""
    H = _channel(H)
    y, single = _as_block(y_Q, H.shape[0])
    filt = build_lra_mmse(H, symbol_energy, noise_variance, per_user_energy, model)
    x_tilde = filt.apply(y)
    e = filt.model.user_energy
    hard = qpsk_slice(x_tilde, e[:, None])
    llrs = np.empty((H.shape[1], y.shape[1], 2))
    for k in range(H.shape[1]):
        mu, eta2 = stream_statistics(filt, k)
        llrs[k] = soft_llr(x_tilde[k], mu, max(eta2, np.finfo(float).tiny), e[k], clip=LLR_CLIP)
    return DetectionOutput(_unblock(hard, single), _unblock(llrs, single))


def _run_mrc(y_Q, H, symbol_energy, noise_variance, per_user_energy):
    return detect_mrc(y_Q, H, symbol_energy, per_user_energy)


def _run_zf(y_Q, H, symbol_energy, noise_variance, per_user_energy):
    return detect_zf(y_Q, H, symbol_energy, per_user_energy)


# name -> callable(y_Q, H, symbol_energy, noise_variance, per_user_energy)
DETECTORS = {
    "mrc": _run_mrc,
    "zf": _run_zf,
    "lra-mmse": detect_lra_mmse,
    "sic-hard": detect_sic_hard,
    "sic-soft": detect_sic_soft,
}
