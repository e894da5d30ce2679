# %% [markdown]
# # Channel estimation from one-bit pilots
#
# LS, BLMMSE and the recursive LRA-RLS estimator are compared on NMSE.
# LRA-RLS updates once per pilot slot and never forms the `M tau` sized
# covariance that BLMMSE inverts.

# %%
import numpy as np

from onebit_mimo.channel import generate_pilots
from onebit_mimo.estimators import FlopCounter, estimate_blmmse, estimate_lra_rls
from onebit_mimo.harness import ExperimentSpec, run_sweep

sweep = (-5.0, 0.0, 5.0, 10.0)
for est in ("ls", "blmmse", "lra-rls"):
    spec = ExperimentSpec(M=32, K=4, tau=16, sweep=sweep, estimator=est, detector=None,
                          trials=100, delta="matched", base_seed=1)
    row = "  ".join(f"{10 * np.log10(r.value):6.2f}" for r in run_sweep(spec))
    print(f"{est:8s} NMSE [dB] at {sweep}: {row}")

# %% [markdown]
# Operation counts: RLS grows linearly in `M`, BLMMSE cubically in `M tau`.

# %%
K, tau = 4, 16
for M in (16, 32, 64):
    X_p = generate_pilots(K, tau, 1.0)
    Y = np.ones((M, tau), complex)
    c_rls, c_bl = FlopCounter(), FlopCounter()
    estimate_lra_rls(Y, X_p, 1.0, counter=c_rls)
    estimate_blmmse(Y, X_p, 1.0, counter=c_bl)
    print(f"M={M:3d}  LRA-RLS {c_rls.total:>10,d}  BLMMSE {c_bl.total:>14,d}")
