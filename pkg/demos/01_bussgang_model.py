# %% [markdown]
# # One-bit quantization as a linear model
#
# A sign quantizer on each rail turns `y` into `y_Q = A y + n_q`, where the
# gain `A` and the distortion covariance follow from the arcsine law.
# Here the closed forms are checked against simulation.

# %%
import numpy as np

from onebit_mimo.channel import generate_channel
from onebit_mimo.quantize import build_bussgang_model, quantize_1bit

rng = np.random.default_rng(0)
M, K, noise_variance = 6, 2, 0.5
H = generate_channel(M, K, rng)
model = build_bussgang_model(H, symbol_energy=1.0, noise_variance=noise_variance)
print("Bussgang gains:", np.round(model.A, 3))

# %% [markdown]
# Draw Gaussian inputs, quantize, and compare the empirical covariance of
# `y_Q` with the arcsine prediction.

# %%
N = 200_000
x = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) / np.sqrt(2)
n = np.sqrt(noise_variance / 2) * (rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N)))
y_q = quantize_1bit(H @ x + n)
empirical = y_q @ y_q.conj().T / N
print("max |empirical - arcsine| =", np.abs(empirical - model.C_yQ).max())

# %% [markdown]
# The quantizer output is uncorrelated with the distortion term only after
# the gain is removed; the residual covariance is `C_nq`.

# %%
n_q = y_q - model.A[:, None] * (H @ x + n)
print("max |E[n_q n_q^H] - C_nq| =", np.abs(n_q @ n_q.conj().T / N - model.C_nq).max())
