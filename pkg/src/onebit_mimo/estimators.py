"""
Channel estimation from 1-bit pilot observations.

Three estimators are provided:

* ``estimate_ls`` -- least squares that ignores the quantizer;
* ``estimate_blmmse`` -- Bussgang LMMSE on the stacked ``M tau`` pilot vector,
  cubic in ``M tau``;
* ``estimate_lra_rls`` -- low-resolution-aware RLS. Each pilot regressor is
  scaled by the scalar Bussgang gain of that pilot slot, and one
  correlation factor is shared by all antennas.

Orientation: ``H_hat[m, :] @ x`` models the sample at antenna ``m``. The
per-antenna RLS weight vector is ``conj(H_hat[m, :])``.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .exceptions import InvalidInputError
from .quantize import arcsine_covariance, bussgang_operator, hermitize

__all__ = [
    "FlopCounter",
    "RlsState",
    "EstimatorReport",
    "pilot_linear_operator",
    "init_rls_state",
    "lra_rls_update",
    "estimate_lra_rls",
    "estimate_ls",
    "estimate_blmmse",
    "nmse",
    "nmse_db",
    "delta_log_linear",
    "delta_matched",
    "DELTA_LOW",
    "DELTA_HIGH",
    "DEFAULT_FORGETTING",
]

DEFAULT_FORGETTING = 0.94
DELTA_LOW = 1e-11
DELTA_HIGH = 3e-1
BLMMSE_LOADING = 1e-10


class FlopCounter:
    """Tally of complex multiply-accumulate operations.

    Estimators add the size of each dense kernel they execute; the totals
    expose how cost scales with ``M``, ``K`` and ``tau``.
    """

    def __init__(self):
        self.total = 0

    def add(self, n) -> None:
        self.total += int(n)

    def __int__(self):
        return self.total


def _count(counter: Optional[FlopCounter], n) -> None:
    if counter is not None:
        counter.add(n)


@dataclass(frozen=True)
class RlsState:
    """Square-root RLS state shared by all antennas.

    ``R`` is the upper-triangular factor of the weighted, regularized pilot
    correlation ``Phi = sum_n lam^(n_tot - n) u u^H + delta lam^n_tot I``
    (``R^H R = Phi``) and ``Q = R^{-H} Z`` carries the cross-correlations
    with the observations, one column per antenna.
    """

    R: np.ndarray
    Q: np.ndarray
    lam: float
    delta: float
    n: int = 0

    @property
    def P(self) -> np.ndarray:
        """Inverse correlation ``Phi^{-1}``."""
        Rinv = scipy.linalg.solve_triangular(self.R, np.eye(self.R.shape[0]))
        return hermitize(Rinv @ Rinv.conj().T)

    @property
    def H_hat(self) -> np.ndarray:
        return scipy.linalg.solve_triangular(self.R, self.Q).conj().T


@dataclass
class EstimatorReport:
    H_hat: np.ndarray
    nmse: float
    flop_estimate: int


def pilot_linear_operator(x_p, noise_variance: float) -> float:
    """Scalar Bussgang gain ``sqrt(2/pi) (x_p^H x_p + sigma_n^2)^{-1/2}`` of one pilot slot."""
    x_p = np.asarray(x_p)
    if noise_variance < 0:
        raise InvalidInputError("noise variance must be non-negative")
    power = float(np.real(np.vdot(x_p, x_p))) + noise_variance
    if power <= 0:
        raise InvalidInputError("pilot slot has zero power and zero noise")
    return float(np.sqrt(2.0 / np.pi / power))


def init_rls_state(M: int, K: int, lam: float = DEFAULT_FORGETTING, delta: float = DELTA_LOW) -> RlsState:
    """Zero estimate with ``P = I / delta``."""
    if not 0 < lam <= 1:
        raise InvalidInputError(f"forgetting factor must lie in (0, 1], got {lam}")
    if not delta > 0:
        raise InvalidInputError(f"regularization must be positive, got {delta}")
    return RlsState(
        R=np.sqrt(delta) * np.eye(K, dtype=complex),
        Q=np.zeros((K, M), dtype=complex),
        lam=float(lam),
        delta=float(delta),
    )


def lra_rls_update(
    state: RlsState,
    x_p,
    y_q,
    noise_variance: float,
    gain: Optional[float] = None,
    counter: Optional[FlopCounter] = None,
) -> RlsState:
    """Process one pilot slot for all antennas.

    With regressor ``u = A_p x_p`` the update is the exponentially weighted
    RLS step, carried out in square-root form: one QR factorization of
    ``[[sqrt(lam) R, sqrt(lam) Q], [u^H, y^H]]`` yields the new ``R`` and
    ``Q``. This equals the gain/inverse-correlation recursion in exact
    arithmetic but stays accurate when ``delta`` is tiny and ``P = I/delta``
    is huge.

    ``gain`` overrides the Bussgang gain of the slot (``gain=1`` turns the
    update into plain weighted RLS on unquantized data).
    """
    x_p = np.asarray(x_p, dtype=complex).reshape(-1)
    y_q = np.asarray(y_q, dtype=complex).reshape(-1)
    K, M = state.Q.shape
    if x_p.shape != (K,) or y_q.shape != (M,):
        raise InvalidInputError(
            f"expected pilot of length {K} and observation of length {M}, "
            f"got {x_p.shape} and {y_q.shape}"
        )
    if not (np.all(np.isfinite(x_p)) and np.all(np.isfinite(y_q))):
        raise InvalidInputError("non-finite pilot or observation")
    a = pilot_linear_operator(x_p, noise_variance) if gain is None else gain
    u = a * x_p
    root = np.sqrt(state.lam)
    aug = np.empty((K + 1, K + M), dtype=complex)
    aug[:K, :K] = root * state.R
    aug[:K, K:] = root * state.Q
    aug[K, :K] = u.conj()
    aug[K, K:] = y_q.conj()
    r = np.linalg.qr(aug, mode="r")
    # Householder QR of a (K+1) x (K+M) block
    _count(counter, K * (K + 1) * (K + M))
    return replace(state, R=r[:K, :K], Q=r[:K, K:], n=state.n + 1)


def _check_pilot_block(Y, X_p):
    Y = np.asarray(Y, dtype=complex)
    X_p = np.asarray(X_p, dtype=complex)
    if Y.ndim != 2 or X_p.ndim != 2 or Y.shape[1] != X_p.shape[1]:
        raise InvalidInputError(
            f"pilot block shapes do not match: Y {Y.shape}, X_p {X_p.shape}"
        )
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X_p))):
        raise InvalidInputError("non-finite pilot block")
    return Y, X_p


def estimate_lra_rls(
    Y_Q_pilot,
    X_p,
    noise_variance: float,
    lam: float = DEFAULT_FORGETTING,
    delta: float = DELTA_LOW,
    counter: Optional[FlopCounter] = None,
    quantized: bool = True,
) -> np.ndarray:
    """Run LRA-RLS over all ``tau`` pilot slots and return ``H_hat`` (M x K).

    ``quantized=False`` uses unit gains, for unquantized observations.
    """
    Y, X_p = _check_pilot_block(Y_Q_pilot, X_p)
    state = init_rls_state(Y.shape[0], X_p.shape[0], lam, delta)
    for n in range(X_p.shape[1]):
        state = lra_rls_update(
            state, X_p[:, n], Y[:, n], noise_variance,
            gain=None if quantized else 1.0, counter=counter,
        )
    K, M = state.Q.shape
    _count(counter, K * K * M)  # back-substitution
    return state.H_hat


def estimate_ls(Y_Q_pilot, X_p, counter: Optional[FlopCounter] = None) -> np.ndarray:
    """Per-antenna LS treating quantized outputs as unquantized:
    ``H_hat = Y X_p^H (X_p X_p^H)^{-1}``."""
    Y, X_p = _check_pilot_block(Y_Q_pilot, X_p)
    K, tau = X_p.shape
    G = X_p @ X_p.conj().T
    if np.linalg.matrix_rank(G) < K:
        raise InvalidInputError("pilot matrix is rank deficient")
    H_hat = np.linalg.solve(G.T, (Y @ X_p.conj().T).T).T
    _count(counter, K * K * tau + Y.shape[0] * K * tau + K ** 3 + Y.shape[0] * K * K)
    return H_hat


def estimate_blmmse(
    Y_Q_pilot, X_p, noise_variance: float, counter: Optional[FlopCounter] = None
) -> np.ndarray:
    """Bussgang LMMSE estimate under a CN(0, I) channel prior.

    The pilot block is stacked column-major into ``y = (X_p^T kron I_M) vec(H) + n``
    and the full ``M tau x M tau`` quantized covariance is inverted.
    """
    Y, X_p = _check_pilot_block(Y_Q_pilot, X_p)
    M = Y.shape[0]
    K, tau = X_p.shape
    L = M * tau
    X_big = np.kron(X_p.T, np.eye(M))
    C_y = hermitize(X_big @ X_big.conj().T) + noise_variance * np.eye(L)
    A = bussgang_operator(C_y)
    C_yQ = arcsine_covariance(C_y) + BLMMSE_LOADING * np.eye(L)
    y = Y.reshape(-1, order="F")
    z = scipy.linalg.cho_solve(scipy.linalg.cho_factor(C_yQ, lower=True), y)
    h = X_big.conj().T @ (A * z)
    # X X^H, arcsine map, Cholesky, two triangular solves, back-projection
    _count(counter, L * L * M * K + L * L + L ** 3 // 3 + 2 * L * L + L * M * K)
    return h.reshape(M, K, order="F")


def nmse(H_hat, H) -> float:
    """``||H_hat - H||_F^2 / ||H||_F^2``."""
    H_hat = np.asarray(H_hat)
    H = np.asarray(H)
    if H_hat.shape != H.shape:
        raise InvalidInputError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    ref = np.linalg.norm(H) ** 2
    if ref == 0:
        raise InvalidInputError("reference channel is all zeros")
    return float(np.linalg.norm(H_hat - H) ** 2 / ref)


def nmse_db(value: float) -> float:
    return float(10.0 * np.log10(value))


def delta_log_linear(points_db: Sequence[float], low: float = DELTA_LOW, high: float = DELTA_HIGH) -> list:
    """Regularization rising log-linearly from ``low`` at the smallest point
    to ``high`` at the largest. A single point gets ``low``."""
    p = np.asarray(points_db, dtype=float)
    if p.size == 0:
        return []
    lo, hi = p.min(), p.max()
    if hi == lo:
        return [float(low)] * p.size
    t = (p - lo) / (hi - lo)
    return [float(v) for v in 10.0 ** (np.log10(low) + t * (np.log10(high) - np.log10(low)))]


def delta_matched(noise_variance: float, pilot_power: float, lam: float, tau: int) -> float:
    """Regularization matched to the residual variance of the linearized pilot model.

    The regressor explains ``(2/pi) P / (P + sigma_n^2)`` of the unit
    quantizer output power (``P = x_p^H x_p``, unit channel prior); the
    rest acts as noise. Dividing by ``lam^tau`` cancels the forgetting
    weight on the regularizer, so the cost matches a ridge (LMMSE-like)
    solution with that noise level.
    """
    resid = 1.0 - (2.0 / np.pi) * pilot_power / (pilot_power + noise_variance)
    return float(resid / lam ** tau)
