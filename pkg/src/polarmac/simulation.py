"""Seeded Monte Carlo link simulation over the Gaussian MAC.

Every trial draws its information words, noise and coset from Philox
streams keyed by ``(seed, purpose, trial_index)``.  The same trial index
therefore sees the same words and the same unit-variance noise at every
Eb/N0 point and for every decoder, and results do not depend on how trials
are spread over worker processes.
"""

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .channel import GmacChannel, ebn0_to_power
from .crc import CRC_POLYNOMIALS, crc_attach
from .design import TAG_COSET, TAG_INFO, TAG_NOISE, DesignResult, design_code, rng_stream
from .iterative import iterative_decode
from .jsc import demod_init, jsc_list_decode, select_candidate
from .polar import _log2_exact, encode

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PointResult",
    "ExperimentResult",
    "TrialOutcome",
    "run_trial",
    "run_experiment",
    "write_results",
    "result_rows",
]

DECODERS = ("jsc", "jsc-list", "iterative")
Z95 = 1.959963984540054


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    k_users: int
    length: int
    info_length: int
    ebn0_db: list
    decoder: str = "jsc-list"
    list_size: int = 8
    iterations: int = 15
    selection: str = "genie"
    max_frames: int = 100_000
    min_errors: int = 100
    seed: int = 0
    design: str | None = None
    symmetrize: bool = False
    batch_size: int = 100
    pyndiah_beta: float | None = None
    pyndiah_alpha: float = 1.0
    damping: float = 0.0

    _KEYS = {
        "users": "k_users",
        "length": "length",
        "info": "info_length",
        "ebn0_db": "ebn0_db",
        "decoder": "decoder",
        "list_size": "list_size",
        "iterations": "iterations",
        "selection": "selection",
        "max_frames": "max_frames",
        "min_errors": "min_errors",
        "seed": "seed",
        "design": "design",
        "symmetrize": "symmetrize",
        "batch_size": "batch_size",
        "pyndiah_beta": "pyndiah_beta",
        "pyndiah_alpha": "pyndiah_alpha",
        "damping": "damping",
    }

    def __post_init__(self):
        if isinstance(self.ebn0_db, (int, float)):
            self.ebn0_db = [self.ebn0_db]
        self.ebn0_db = [float(v) for v in self.ebn0_db]
        self.validate()

    @property
    def crc_bits(self):
        if self.selection.startswith("crc-"):
            return int(self.selection[4:])
        return 0

    @property
    def effective_list_size(self):
        return 1 if self.decoder == "jsc" else self.list_size

    def validate(self):
        if self.k_users < 1:
            raise ConfigError("users must be >= 1")
        try:
            _log2_exact(self.length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 <= self.info_length <= self.length:
            raise ConfigError("info must lie in [0, length]")
        if not self.ebn0_db:
            raise ConfigError("ebn0_db grid is empty")
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}")
        if self.list_size < 1 or self.iterations < 1:
            raise ConfigError("list_size and iterations must be >= 1")
        if self.max_frames < 1 or self.min_errors < 1 or self.batch_size < 1:
            raise ConfigError("max_frames, min_errors and batch_size must be >= 1")
        if self.selection != "genie":
            if not self.selection.startswith("crc-") or not self.selection[4:].isdigit():
                raise ConfigError(f"unknown selection mode {self.selection!r}")
            if self.crc_bits not in CRC_POLYNOMIALS:
                raise ConfigError(f"CRC length must be one of {sorted(CRC_POLYNOMIALS)}")
            if self.crc_bits > self.info_length:
                raise ConfigError("CRC does not fit into the information bits")
        if not 0.0 <= self.damping < 1.0:
            raise ConfigError("damping must lie in [0, 1)")

    @classmethod
    def from_dict(cls, data, base_dir=None):
        unknown = set(data) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"users", "length", "info", "ebn0_db"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        kwargs = {cls._KEYS[k]: v for k, v in data.items()}
        if kwargs.get("design") and base_dir is not None:
            kwargs["design"] = str(Path(base_dir) / kwargs["design"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self):
        return {key: getattr(self, attr) for key, attr in self._KEYS.items()}


@dataclass
class TrialOutcome:
    errors: np.ndarray  # (K,) bool
    degenerate: bool = False


@dataclass
class PointResult:
    ebn0_db: float
    frames: int
    errors: list  # per user
    degenerate: int
    wall_seconds: float

    @property
    def pe_user(self):
        return [e / self.frames for e in self.errors]

    @property
    def pe_avg(self):
        return float(np.mean(self.pe_user))

    @property
    def ci95_halfwidth(self):
        """Normal-approximation 95% half-width of ``pe_avg``."""
        p = self.pe_avg
        return Z95 * math.sqrt(p * (1.0 - p) / self.frames)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: list = field(default_factory=list)

    @property
    def accounting(self):
        if self.config.decoder == "iterative":
            return "per-user"
        if self.config.selection == "genie":
            return "genie-joint"
        return "crc-per-user"


def _decode_jsc(cfg, frozen, y, power, coset, info):
    pmfs = demod_init(y, power, cfg.k_users, coset)
    cands = jsc_list_decode(pmfs, frozen, cfg.effective_list_size)
    k = cfg.k_users
    if cands.degenerate:
        return TrialOutcome(np.ones(k, dtype=bool), degenerate=True)
    if cfg.selection == "genie":
        _, found = select_candidate(cands, "genie", true_info=info)
        return TrialOutcome(np.full(k, not found))
    chosen, found = select_candidate(cands, "crc", crc_bits=cfg.crc_bits)
    if not found:
        return TrialOutcome(np.ones(k, dtype=bool))
    return TrialOutcome(np.any(chosen != info, axis=1))


def _decode_iterative(cfg, frozen, y, power, coset, info):
    res = iterative_decode(
        y,
        frozen,
        power,
        list_size=cfg.list_size,
        iterations=cfg.iterations,
        beta=cfg.pyndiah_beta,
        alpha=cfg.pyndiah_alpha,
        damping=cfg.damping,
        coset=coset,
    )
    return TrialOutcome(np.array([np.any(res.info_bits[i] != info[i]) for i in range(cfg.k_users)]))


def run_trial(cfg, design, ebn0_db, trial_index):
    """Encode, transmit and decode one frame; report per-user word errors."""
    k_users, n, k = cfg.k_users, cfg.length, cfg.info_length
    if k == 0:
        return TrialOutcome(np.zeros(k_users, dtype=bool))
    frozen = design.frozen_matrix()
    r = cfg.crc_bits
    payload = rng_stream(cfg.seed, TAG_INFO, trial_index).integers(0, 2, (k_users, k - r), dtype=np.int8)
    info = crc_attach(payload, r) if r else payload
    codewords = np.stack([encode(info[i], frozen[i]) for i in range(k_users)])
    power = ebn0_to_power(ebn0_db, n, k)
    channel = GmacChannel(k_users, power, cfg.symmetrize)
    coset = None
    if cfg.symmetrize:
        coset = rng_stream(cfg.seed, TAG_COSET, trial_index).integers(0, 2, (k_users, n), dtype=np.int8)
    noise = rng_stream(cfg.seed, TAG_NOISE, trial_index).standard_normal(n)
    y, coset = channel.transmit(codewords, None, noise=noise, coset=coset)
    if cfg.decoder == "iterative":
        return _decode_iterative(cfg, frozen, y, power, coset, info)
    return _decode_jsc(cfg, frozen, y, power, coset, info)


def _run_chunk(cfg, design, ebn0_db, trials):
    errors = np.zeros(cfg.k_users, dtype=np.int64)
    frame_errors = 0
    degenerate = 0
    for t in trials:
        out = run_trial(cfg, design, ebn0_db, t)
        errors += out.errors
        frame_errors += bool(out.errors.any())
        degenerate += out.degenerate
    return errors, frame_errors, degenerate


def _chunks(start, stop, parts):
    bounds = np.linspace(start, stop, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _load_design(cfg):
    if cfg.design is None:
        return design_code(cfg.k_users, cfg.length, cfg.info_length, cfg.seed)
    design = DesignResult.load(cfg.design)
    if (design.k_users, design.length, design.info_length) != (cfg.k_users, cfg.length, cfg.info_length):
        raise ConfigError(
            f"design is for K={design.k_users}, N={design.length}, k={design.info_length}; "
            f"config asks for K={cfg.k_users}, N={cfg.length}, k={cfg.info_length}"
        )
    return design


def run_experiment(cfg, design=None, workers=1, progress=None):
    """Sweep the Eb/N0 grid.

    Trials run in batches of ``cfg.batch_size``; after each batch the point
    stops once ``min_errors`` frame errors or ``max_frames`` frames are
    reached.  Batches are split evenly across ``workers`` processes.
    """
    if design is None:
        design = _load_design(cfg)
    result = ExperimentResult(config=cfg)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for ebn0 in cfg.ebn0_db:
            start = time.perf_counter()
            errors = np.zeros(cfg.k_users, dtype=np.int64)
            frame_errors = degenerate = frames = 0
            while frames < cfg.max_frames and frame_errors < cfg.min_errors:
                stop = min(frames + cfg.batch_size, cfg.max_frames)
                job = partial(_run_chunk, cfg, design, ebn0)
                if pool is None:
                    parts = [job(range(frames, stop))]
                else:
                    parts = list(pool.map(job, _chunks(frames, stop, workers)))
                for e, fe, d in parts:
                    errors += e
                    frame_errors += fe
                    degenerate += d
                frames = stop
                if progress is not None:
                    progress(ebn0, frames, frame_errors)
            result.points.append(
                PointResult(
                    ebn0_db=ebn0,
                    frames=frames,
                    errors=[int(e) for e in errors],
                    degenerate=degenerate,
                    wall_seconds=time.perf_counter() - start,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def _fmt(x):
    return repr(float(x))


def result_columns(k_users):
    return (
        ["ebn0_db", "frames", "decoder", "list_size", "iterations", "selection_mode", "seed"]
        + [f"err_user_{i + 1}" for i in range(k_users)]
        + [f"pe_user_{i + 1}" for i in range(k_users)]
        + ["pe_avg", "ci95_halfwidth", "wall_seconds"]
    )


def result_rows(result):
    cfg = result.config
    for pt in result.points:
        yield (
            [_fmt(pt.ebn0_db), pt.frames, cfg.decoder, cfg.effective_list_size, cfg.iterations, cfg.selection, cfg.seed]
            + pt.errors
            + [_fmt(p) for p in pt.pe_user]
            + [_fmt(pt.pe_avg), _fmt(pt.ci95_halfwidth), f"{pt.wall_seconds:.3f}"]
        )


def write_results(result, path, fmt="csv"):
    """Write a result as CSV (one row per Eb/N0 point) or JSON."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(result_columns(result.config.k_users))
        writer.writerows(result_rows(result))
        text = buf.getvalue()
    elif fmt == "json":
        doc = {
            "config": result.config.to_dict(),
            "accounting": result.accounting,
            "points": [
                dict(
                    asdict(pt),
                    pe_user=pt.pe_user,
                    pe_avg=pt.pe_avg,
                    ci95_halfwidth=pt.ci95_halfwidth,
                )
                for pt in result.points
            ],
        }
        text = json.dumps(doc, indent=1) + "\n"
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    Path(path).write_text(text)
