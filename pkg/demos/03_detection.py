# %% [markdown]
# # Uncoded detection
#
# Linear MRC and ZF ignore the quantizer. LRA-MMSE builds its filter from
# the Bussgang model, and the SIC variant peels users off strongest first.

# %%
from onebit_mimo.harness import ExperimentSpec, run_sweep

sweep = (0.0, 5.0, 10.0)
for det in ("mrc", "zf", "lra-mmse", "sic-hard"):
    spec = ExperimentSpec(M=32, K=4, data_len=64, sweep=sweep, detector=det,
                          trials=300, base_seed=2)
    print(f"{det:9s}", "  ".join(f"{r.value:.2e}" for r in run_sweep(spec)))

# %% [markdown]
# The soft SIC detector also reports its ordering and the per-stage
# Gaussian approximation `x_tilde ~ mu x + N(0, eta^2)` used for LLRs.

# %%
import numpy as np

from onebit_mimo.channel import FrameConfig, snr_db_to_noise_variance, transmit
from onebit_mimo.detectors import detect_sic_soft

s2 = snr_db_to_noise_variance(5.0, 4)
frame = transmit(FrameConfig(M=32, K=4, tau=16, data_len=8, noise_variance=s2),
                 np.random.default_rng(3))
out = detect_sic_soft(frame.Y_Q_data, frame.H, 1.0, s2)
print("order:", out.trace.order)
print("mu:   ", np.round(out.trace.mu, 3))
print("eta^2:", np.round(out.trace.eta2, 3))
print("first user LLRs:\n", np.round(out.llrs[0, :3], 2))
