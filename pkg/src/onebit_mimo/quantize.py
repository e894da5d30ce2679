"""
1-bit quantization and second-order statistics of the quantized output.

A complex sample is quantized rail by rail to ``{+1/sqrt(2), -1/sqrt(2)}``,
so every quantized entry has unit magnitude. For zero-mean circularly
symmetric Gaussian inputs the statistics of the quantizer output are known
in closed form:

* cross-correlation (Bussgang): ``E[s s_Q^H] = sqrt(2/pi) C_s K`` with
  ``K = diag(C_s)^{-1/2}``;
* output covariance (arcsine law):
  ``C_sQ = 2/pi (asin(K Re{C_s} K) + j asin(K Im{C_s} K))``.

These give the statistically equivalent linear model
``y_Q = A y + n_q`` used by the estimators and detectors.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import (
    DegenerateCovarianceError,
    InvalidCovarianceError,
    InvalidInputError,
)

__all__ = [
    "BussgangModel",
    "quantize_1bit",
    "arcsine_covariance",
    "bussgang_operator",
    "signal_covariance",
    "build_bussgang_model",
    "unquantized_model",
    "hermitize",
]

INV_SQRT2 = 1.0 / np.sqrt(2.0)

# arcsine arguments may exceed 1 by this much from round-off and are clamped
ASIN_CLAMP_TOL = 1e-9


def hermitize(X: np.ndarray) -> np.ndarray:
    """Return ``(X + X^H) / 2``."""
    return 0.5 * (X + X.conj().T)


def _check_finite(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")


def quantize_1bit(v) -> np.ndarray:
    """Quantize real and imaginary parts to ``+-1/sqrt(2)`` independently.

    The threshold is zero and ``sgn(0) = +1``. Works on arrays of any
    shape; the output is complex with the input's shape.
    """
    v = np.asarray(v)
    _check_finite(v, "input")
    re = np.where(np.real(v) >= 0, INV_SQRT2, -INV_SQRT2)
    im = np.where(np.imag(v) >= 0, INV_SQRT2, -INV_SQRT2)
    return re + 1j * im


def _inverse_sqrt_diag(C: np.ndarray) -> np.ndarray:
    d = np.real(np.diag(C))
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise DegenerateCovarianceError(
            "covariance diagonal must be strictly positive, got min "
            f"{float(np.min(d)) if d.size else float('nan')}"
        )
    return 1.0 / np.sqrt(d)


def _safe_arcsin(X: np.ndarray, tol: float) -> np.ndarray:
    excess = np.max(np.abs(X)) - 1.0 if X.size else -1.0
    if excess > tol:
        raise InvalidCovarianceError(
            f"normalized correlation exceeds 1 by {excess:.3e} (tolerance {tol:.0e})"
        )
    return np.arcsin(np.clip(X, -1.0, 1.0))


def arcsine_covariance(C_s, tol: float = ASIN_CLAMP_TOL) -> np.ndarray:
    """Covariance of the 1-bit quantized version of ``s ~ CN(0, C_s)``.

    Parameters
    ----------
    C_s : (M, M) complex array
        Hermitian PSD input covariance with positive diagonal.
    tol : float
        Normalized entries may exceed unit magnitude by at most this much
        (they are clamped); larger excess raises ``InvalidCovarianceError``.

    Returns
    -------
    (M, M) complex array
        Hermitian, unit diagonal.
    """
    C_s = np.atleast_2d(np.asarray(C_s, dtype=complex))
    _check_finite(C_s, "covariance")
    k = _inverse_sqrt_diag(C_s)
    scale = np.outer(k, k)
    re = _safe_arcsin(C_s.real * scale, tol)
    im = _safe_arcsin(C_s.imag * scale, tol)
    out = hermitize((2.0 / np.pi) * (re + 1j * im))
    # the diagonal is 1 exactly in theory; pin it against round-off
    np.fill_diagonal(out, 1.0)
    return out


def bussgang_operator(C_y) -> np.ndarray:
    """Diagonal Bussgang gain ``sqrt(2/pi) diag(C_y)^{-1/2}`` as a length-M vector."""
    C_y = np.atleast_2d(np.asarray(C_y))
    return np.sqrt(2.0 / np.pi) * _inverse_sqrt_diag(C_y)


def _user_energies(K: int, symbol_energy: float, per_user_energy) -> np.ndarray:
    if per_user_energy is None:
        if not symbol_energy > 0:
            raise InvalidInputError("symbol energy must be positive")
        return np.full(K, float(symbol_energy))
    e = np.asarray(per_user_energy, dtype=float).reshape(-1)
    if e.shape != (K,):
        raise InvalidInputError(f"per_user_energy must have length {K}, got {e.shape}")
    if np.any(~(e > 0)):
        raise InvalidInputError("per-user energies must be positive")
    return e


def signal_covariance(
    H, symbol_energy: float = 1.0, noise_variance: float = 1.0, per_user_energy=None
) -> np.ndarray:
    """Covariance ``H D H^H + sigma_n^2 I`` of the unquantized receive vector.

    ``D`` is ``symbol_energy * I`` or ``diag(per_user_energy)`` when given.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or min(H.shape) < 1:
        raise InvalidInputError(f"H must be a non-empty M x K matrix, got shape {H.shape}")
    _check_finite(H, "H")
    if noise_variance < 0:
        raise InvalidInputError("noise variance must be non-negative")
    M, K = H.shape
    e = _user_energies(K, symbol_energy, per_user_energy)
    C = (H * e) @ H.conj().T + noise_variance * np.eye(M)
    return hermitize(C)


@dataclass(frozen=True)
class BussgangModel:
    """Statistically equivalent linear model ``y_Q = A y + n_q``.

    ``A`` is stored as the length-M vector of diagonal gains.
    ``user_energy`` holds the K per-user symbol energies behind ``C_y``.
    """

    A: np.ndarray
    C_y: np.ndarray
    C_yQ: np.ndarray
    C_nq: np.ndarray
    noise_variance: float
    symbol_energy: float
    user_energy: np.ndarray

    @property
    def M(self) -> int:
        return self.A.shape[0]


def build_bussgang_model(
    H, symbol_energy: float = 1.0, noise_variance: float = 1.0, per_user_energy=None
) -> BussgangModel:
    H = np.asarray(H, dtype=complex)
    C_y = signal_covariance(H, symbol_energy, noise_variance, per_user_energy)
    A = bussgang_operator(C_y)
    C_yQ = arcsine_covariance(C_y)
    C_nq = hermitize(C_yQ - A[:, None] * C_y * A[None, :])
    return BussgangModel(
        A=A,
        C_y=C_y,
        C_yQ=C_yQ,
        C_nq=C_nq,
        noise_variance=float(noise_variance),
        symbol_energy=float(symbol_energy),
        user_energy=_user_energies(H.shape[1], symbol_energy, per_user_energy),
    )


def unquantized_model(
    H, symbol_energy: float = 1.0, noise_variance: float = 0.0, per_user_energy=None
) -> BussgangModel:
    """Model with the quantizer bypassed: ``A = I``, ``C_nq = 0``, ``C_yQ = C_y``.

    Used for sanity checks where observations are the unquantized ``y``.
    """
    H = np.asarray(H, dtype=complex)
    C_y = signal_covariance(H, symbol_energy, noise_variance, per_user_energy)
    M = H.shape[0]
    return BussgangModel(
        A=np.ones(M),
        C_y=C_y,
        C_yQ=C_y.copy(),
        C_nq=np.zeros((M, M), dtype=complex),
        noise_variance=float(noise_variance),
        symbol_energy=float(symbol_energy),
        user_energy=_user_energies(H.shape[1], symbol_energy, per_user_energy),
    )
