"""
Monte-Carlo sweep runner.

Every trial draws from its own generator seeded by
``(base_seed, point_index, trial_index)``. Trials are grouped into
fixed-size chunks independent of the worker count, and per-trial results
are reduced in trial order, so output values are identical for any degree
of parallelism.
"""

import csv
import dataclasses
import functools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .channel import (
    SNR_CONVENTION,
    FrameConfig,
    ebn0_db_to_snr_db,
    near_far_energies,
    qpsk_hard_demap,
    snr_db_to_noise_variance,
    transmit,
)
from .detectors import (
    LLR_CLIP,
    detect_lra_mmse,
    detect_mrc,
    detect_sic_hard,
    detect_sic_soft,
    detect_zf,
)
from .estimators import (
    delta_log_linear,
    delta_matched,
    estimate_blmmse,
    estimate_lra_rls,
    estimate_ls,
    nmse,
)
from .exceptions import ConfigError, OneBitMimoError
from .ldpc import build_code, decode_spa, encode
from .quantize import unquantized_model

__all__ = [
    "ESTIMATORS",
    "DETECTOR_NAMES",
    "CSV_COLUMNS",
    "ExperimentSpec",
    "CurveRecord",
    "TrialError",
    "run_point",
    "run_sweep",
    "write_results",
    "read_csv",
    "resolve_deltas",
]

ESTIMATORS = ("perfect-csi", "ls", "blmmse", "lra-rls")
DETECTOR_NAMES = ("mrc", "zf", "lra-mmse", "sic-hard", "sic-soft")
SOFT_DETECTORS = ("lra-mmse", "sic-soft")
CSV_COLUMNS = (
    "point_db", "metric", "value", "stderr", "trials", "estimator", "detector",
    "M", "K", "tau", "coded", "near_far_db", "user_index", "seed",
)
CHUNK_TRIALS = 25


class TrialError(OneBitMimoError, RuntimeError):
    """A trial failed; the whole point is aborted."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One estimator/detector combination swept over SNR or Eb/N0 points.

    ``detector=None`` measures channel-estimation NMSE only. ``delta`` is
    the LRA-RLS regularization: ``"log-linear"`` (1e-11 at the lowest point
    rising to 0.3 at the highest), ``"matched"`` (see
    :func:`~onebit_mimo.estimators.delta_matched`), a number, or one number
    per sweep point. In coded mode each user sends one codeword per frame,
    so the data block length is ``ldpc_n / 2``.
    """

    M: int = 32
    K: int = 4
    tau: int = 16
    data_len: int = 64
    symbol_energy: float = 1.0
    sweep: Tuple[float, ...] = (0.0,)
    sweep_axis: str = "snr"
    estimator: str = "perfect-csi"
    detector: Optional[str] = "lra-mmse"
    coded: bool = False
    trials: int = 100
    rls_lambda: float = 0.94
    delta: Union[str, float, Tuple[float, ...]] = "log-linear"
    near_far_db: Optional[float] = None
    pilot_mode: str = "orthogonal"
    quantize: bool = True
    ldpc_n: int = 512
    ldpc_rate: float = 0.5
    ldpc_column_weight: int = 3
    ldpc_seed: int = 0
    ldpc_max_iter: int = 50
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sweep", tuple(float(p) for p in self.sweep))
        if not isinstance(self.delta, str) and np.ndim(self.delta) == 1:
            object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))
        self.validate()

    def validate(self) -> None:
        def bad(msg):
            raise ConfigError(msg)

        if not self.sweep:
            bad("sweep must contain at least one point")
        if self.trials < 1:
            bad("trials must be >= 1")
        if not (self.M >= self.K >= 1) or self.tau < 1:
            bad(f"need M >= K >= 1 and tau >= 1 (M={self.M}, K={self.K}, tau={self.tau})")
        if self.data_len < 1 and not self.coded:
            bad("data_len must be >= 1")
        if not self.symbol_energy > 0:
            bad("symbol_energy must be positive")
        if self.estimator not in ESTIMATORS:
            bad(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.detector is not None and self.detector not in DETECTOR_NAMES:
            bad(f"unknown detector {self.detector!r}; choose from {DETECTOR_NAMES}")
        if self.detector is None and self.estimator == "perfect-csi":
            bad("an NMSE run (detector=null) needs an estimator other than perfect-csi")
        if self.detector is None and self.coded:
            bad("coded runs need a detector")
        if self.coded and self.detector not in SOFT_DETECTORS:
            bad(f"coded runs need a soft-output detector {SOFT_DETECTORS}")
        if self.sweep_axis not in ("snr", "ebn0"):
            bad("sweep_axis must be 'snr' or 'ebn0'")
        if not 0 < self.rls_lambda <= 1:
            bad("rls_lambda must lie in (0, 1]")
        if self.near_far_db is not None and self.near_far_db < 0:
            bad("near_far_db must be >= 0")
        if self.pilot_mode not in ("orthogonal", "random"):
            bad("pilot_mode must be 'orthogonal' or 'random'")
        if isinstance(self.delta, str):
            if self.delta not in ("log-linear", "matched"):
                bad("delta must be 'log-linear', 'matched', a number or a list")
        elif isinstance(self.delta, tuple):
            if len(self.delta) != len(self.sweep):
                bad("delta list must have one value per sweep point")
            if any(not d > 0 for d in self.delta):
                bad("delta values must be positive")
        elif not float(self.delta) > 0:
            bad("delta must be positive")
        if self.pilot_mode == "orthogonal" and (self.tau < self.K or self.tau & (self.tau - 1)):
            bad(f"orthogonal pilots need tau >= K and tau a power of two (tau={self.tau})")
        if self.estimator == "ls" and self.tau < self.K:
            bad("LS estimation needs tau >= K")

    @property
    def metric(self) -> str:
        if self.detector is None:
            return "nmse"
        return "ber_coded" if self.coded else "ber_uncoded"

    @property
    def frame_data_len(self) -> int:
        return self.ldpc_n // 2 if self.coded else self.data_len

    @property
    def code_rate(self) -> float:
        return self.ldpc_rate if self.coded else 1.0

    def energies(self) -> Optional[np.ndarray]:
        if self.near_far_db is None:
            return None
        return near_far_energies(self.K, self.near_far_db, self.symbol_energy)

    def snr_db(self, point: float) -> float:
        if self.sweep_axis == "snr":
            return point
        return ebn0_db_to_snr_db(point, self.code_rate)

    def noise_variance(self, point: float) -> float:
        return snr_db_to_noise_variance(self.snr_db(point), self.K, self.symbol_energy)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweep"] = list(self.sweep)
        if isinstance(self.delta, tuple):
            d["delta"] = list(self.delta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        return cls(**d)


def resolve_deltas(spec: ExperimentSpec) -> List[float]:
    """LRA-RLS regularization for each sweep point."""
    if isinstance(spec.delta, tuple):
        return list(spec.delta)
    if spec.delta == "log-linear":
        return delta_log_linear([spec.snr_db(p) for p in spec.sweep])
    if spec.delta == "matched":
        pilot_power = float(np.sum(spec.energies())) if spec.near_far_db is not None \
            else spec.K * spec.symbol_energy
        return [delta_matched(spec.noise_variance(p), pilot_power, spec.rls_lambda, spec.tau)
                for p in spec.sweep]
    return [float(spec.delta)] * len(spec.sweep)


@dataclass
class CurveRecord:
    point_db: float
    metric: str
    value: float
    stderr: float
    trials: int
    estimator: str
    detector: str
    M: int
    K: int
    tau: int
    coded: bool
    near_far_db: Optional[float]
    user_index: int
    seed: int
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    def csv_row(self) -> dict:
        row = {}
        for c in CSV_COLUMNS:
            v = getattr(self, c)
            if v is None:
                row[c] = ""
            elif isinstance(v, bool):
                row[c] = "1" if v else "0"
            elif isinstance(v, float):
                row[c] = repr(v)
            else:
                row[c] = str(v)
        return row


@functools.lru_cache(maxsize=8)
def _code(n: int, rate: float, column_weight: int, seed: int):
    return build_code(n, rate, column_weight, seed)


def _estimate(spec: ExperimentSpec, frame, noise_variance: float, delta: float) -> np.ndarray:
    if spec.estimator == "perfect-csi":
        return frame.H
    if spec.estimator == "ls":
        return estimate_ls(frame.Y_Q_pilot, frame.X_p)
    if spec.estimator == "blmmse":
        return estimate_blmmse(frame.Y_Q_pilot, frame.X_p, noise_variance)
    return estimate_lra_rls(frame.Y_Q_pilot, frame.X_p, noise_variance,
                            spec.rls_lambda, delta, quantized=spec.quantize)


def _detect(spec: ExperimentSpec, y, H, noise_variance: float):
    e = spec.energies()
    E = spec.symbol_energy
    if spec.detector == "mrc":
        return detect_mrc(y, H, E, e)
    if spec.detector == "zf":
        return detect_zf(y, H, E, e)
    model = None if spec.quantize else unquantized_model(H, E, noise_variance, e)
    fn = {"lra-mmse": detect_lra_mmse, "sic-hard": detect_sic_hard,
          "sic-soft": detect_sic_soft}[spec.detector]
    return fn(y, H, E, noise_variance, e, model=model)


def _run_chunk(spec: ExperimentSpec, point_index: int, trials: range,
               noise_variance: float, delta: float):
    """Run a contiguous block of trials; returns per-trial NMSE and per-user bit errors."""
    t0 = time.perf_counter()
    cfg = FrameConfig(
        M=spec.M, K=spec.K, tau=spec.tau, data_len=spec.frame_data_len,
        symbol_energy=spec.symbol_energy, noise_variance=noise_variance,
        per_user_energy=None if spec.near_far_db is None else tuple(spec.energies()),
        pilot_mode=spec.pilot_mode,
    )
    code = _code(spec.ldpc_n, spec.ldpc_rate, spec.ldpc_column_weight, spec.ldpc_seed) \
        if spec.coded else None
    nm = np.zeros(len(trials))
    errors = np.zeros((len(trials), spec.K), dtype=np.int64)
    llr_rows, info_rows = [], []
    for i, t in enumerate(trials):
        try:
            rng = np.random.default_rng([spec.base_seed, point_index, t])
            payload = info = None
            if code is not None:
                info = rng.integers(0, 2, size=(spec.K, code.k), dtype=np.uint8)
                payload = encode(code, info)
            frame = transmit(cfg, rng, payload_bits=payload, quantize=spec.quantize)
            H_hat = _estimate(spec, frame, noise_variance, delta)
            if spec.estimator != "perfect-csi":
                nm[i] = nmse(H_hat, frame.H)
            if spec.detector is None:
                continue
            out = _detect(spec, frame.Y_Q_data, H_hat, noise_variance)
            if code is None:
                bits = qpsk_hard_demap(out.hard_symbols)
                errors[i] = np.sum(bits != frame.payload_bits, axis=1)
            else:
                llr_rows.append(out.llrs.reshape(spec.K, -1))
                info_rows.append(info)
        except OneBitMimoError as exc:
            raise TrialError(f"point {point_index}, trial {t}: {exc}") from exc
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise TrialError(f"point {point_index}, trial {t}: {exc!r}") from exc
    if code is not None and llr_rows:
        res = decode_spa(code, np.concatenate(llr_rows), spec.ldpc_max_iter)
        decided = res.bits[:, code.info_positions].reshape(len(trials), spec.K, -1)
        errors[:] = np.sum(decided != np.stack(info_rows), axis=2)
    return point_index, trials.start, nm, errors, time.perf_counter() - t0


def _bits_per_user(spec: ExperimentSpec) -> int:
    if spec.coded:
        return _code(spec.ldpc_n, spec.ldpc_rate, spec.ldpc_column_weight, spec.ldpc_seed).k
    return 2 * spec.data_len


def _records(spec: ExperimentSpec, point_index: int, nm, errors, wall, noise_variance, delta):
    point = spec.sweep[point_index]
    base = dict(
        point_db=point, trials=spec.trials, estimator=spec.estimator,
        detector=spec.detector or "none", M=spec.M, K=spec.K, tau=spec.tau,
        coded=spec.coded, near_far_db=spec.near_far_db, seed=spec.base_seed,
        wall_time=wall,
        extras={"snr_db": spec.snr_db(point), "noise_variance": noise_variance,
                "delta": delta if spec.estimator == "lra-rls" else None},
    )
    if spec.detector is None:
        value = float(np.mean(nm))
        se = float(np.std(nm, ddof=1) / np.sqrt(nm.size)) if nm.size > 1 else 0.0
        return [CurveRecord(metric="nmse", value=value, stderr=se, user_index=-1, **base)]
    nbits = _bits_per_user(spec) * spec.trials

    def ber(err, n):
        p = float(err) / n
        return p, float(np.sqrt(p * (1.0 - p) / n))

    p, se = ber(errors.sum(), nbits * spec.K)
    out = [CurveRecord(metric=spec.metric, value=p, stderr=se, user_index=-1, **base)]
    if spec.near_far_db is not None:
        for k in range(spec.K):
            p, se = ber(errors[:, k].sum(), nbits)
            out.append(CurveRecord(metric="ber_per_user", value=p, stderr=se, user_index=k, **base))
    return out


def _chunks(spec: ExperimentSpec, point_indices):
    for p in point_indices:
        for start in range(0, spec.trials, CHUNK_TRIALS):
            yield p, range(start, min(start + CHUNK_TRIALS, spec.trials))


def _execute(spec: ExperimentSpec, point_indices, workers: int,
             progress: Optional[Callable[[CurveRecord], None]] = None) -> List[CurveRecord]:
    deltas = resolve_deltas(spec)
    noise = [spec.noise_variance(p) for p in spec.sweep]
    jobs = [(spec, p, r, noise[p], deltas[p]) for p, r in _chunks(spec, point_indices)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, *zip(*jobs)))
    else:
        results = [_run_chunk(*job) for job in jobs]
    records = []
    for p in point_indices:
        parts = sorted((r for r in results if r[0] == p), key=lambda r: r[1])
        nm = np.concatenate([r[2] for r in parts])
        errors = np.concatenate([r[3] for r in parts])
        wall = float(sum(r[4] for r in parts))
        recs = _records(spec, p, nm, errors, wall, noise[p], deltas[p])
        if progress is not None:
            for rec in recs:
                progress(rec)
        records.extend(recs)
    return records


def run_point(spec: ExperimentSpec, point_index: int, workers: int = 1) -> List[CurveRecord]:
    """Records for one sweep point (one aggregate, plus K per-user records in near-far mode)."""
    if not 0 <= point_index < len(spec.sweep):
        raise ConfigError(f"point index {point_index} outside sweep of {len(spec.sweep)}")
    return _execute(spec, [point_index], workers)


def run_sweep(spec: ExperimentSpec, workers: int = 1,
              progress: Optional[Callable[[CurveRecord], None]] = None) -> List[CurveRecord]:
    spec.validate()
    return _execute(spec, list(range(len(spec.sweep))), workers, progress)


def write_results(records: Sequence[CurveRecord], path, fmt: str = "csv",
                  specs: Sequence[ExperimentSpec] = ()) -> None:
    """Write records as CSV (fixed column order, no timing) or JSON (with specs and metadata)."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in records:
                writer.writerow(r.csv_row())
    elif fmt == "json":
        doc = {
            "version": __version__,
            "metadata": {"snr_convention": SNR_CONVENTION, "llr_clip": LLR_CLIP,
                         "ber_stderr": "binomial", "nmse_stderr": "std/sqrt(trials)"},
            "specs": [s.to_dict() for s in specs],
            "records": [dataclasses.asdict(r) for r in records],
        }
        path.write_text(json.dumps(doc, indent=2) + "\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}")


def read_csv(path) -> List[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
