"""Master/Slave timestamp-exchange simulation.

One synchronization round exchanges four timestamps over a configurable
link; the slave recovers the line delay and its clock offset from

    D = ((t4 - t1) - (t3 - t2)) / 2
    O = (t2 - t1) - D

and corrects itself with a proportional servo. Timestamps are integer
nanoseconds (optionally coarser when a quantization step is set, the
plain-counter pole of the phase-detector model); sub-nanosecond effects
enter only through jitter draws before rounding. Frequency transfer is
modeled as the slave sharing the master's drift while a session runs.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np

from .stability import TimeErrorSeries

DEFAULT_TURNAROUND_NS = 1000


@dataclass(frozen=True)
class SimClock:
    """A clock described by its offset from the reference, fractional
    frequency offset, and white timestamping noise."""

    true_offset_ns: float = 0.0
    drift_ppb: float = 0.0
    jitter_ns_rms: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.jitter_ns_rms < 0:
            raise ValueError("jitter_ns_rms must be >= 0")


@dataclass(frozen=True)
class LinkModel:
    """Fixed propagation delays plus per-message noise and timestamp
    granularity (0 = ideal phase detector, integer-ns timestamps)."""

    delay_forward_ns: float = 0.0
    delay_backward_ns: float = 0.0
    jitter_ns_rms: float = 0.0
    quantization_ns: int = 0

    def __post_init__(self) -> None:
        if self.delay_forward_ns < 0 or self.delay_backward_ns < 0:
            raise ValueError("link delays must be >= 0")
        if self.jitter_ns_rms < 0:
            raise ValueError("jitter_ns_rms must be >= 0")
        if self.quantization_ns < 0:
            raise ValueError("quantization_ns must be >= 0")


class WrTimestampQuartet(NamedTuple):
    """The four timestamps of one exchange: t1/t4 in the master timebase,
    t2/t3 in the slave timebase, all integer nanoseconds."""

    t1: int
    t2: int
    t3: int
    t4: int


def _quantize(value_ns: float, quantization_ns: int) -> int:
    if quantization_ns > 0:
        return int(round(value_ns / quantization_ns)) * quantization_ns
    return int(round(value_ns))


def exchange(
    master: SimClock,
    slave: SimClock,
    link: LinkModel,
    epoch_ns: int,
    turnaround_ns: float = DEFAULT_TURNAROUND_NS,
    rng: np.random.Generator | None = None,
) -> WrTimestampQuartet:
    """Simulate one timestamp exchange starting at master time epoch_ns.

    Reception timestamps (t2, t4) pick up link noise plus the receiving
    clock's own timestamping noise; every timestamp is quantized to the
    link granularity. Callers running many noisy exchanges should pass a
    shared generator, otherwise draws repeat between calls.
    """
    if epoch_ns < 0:
        raise ValueError("epoch_ns must be >= 0")
    noisy = link.jitter_ns_rms > 0 or master.jitter_ns_rms > 0 or slave.jitter_ns_rms > 0
    if noisy and rng is None:
        rng = np.random.default_rng((master.rng_seed, slave.rng_seed))

    def _noise(clock_jitter: float) -> float:
        total = 0.0
        if link.jitter_ns_rms > 0:
            total += rng.normal(0.0, link.jitter_ns_rms)
        if clock_jitter > 0:
            total += rng.normal(0.0, clock_jitter)
        return total

    rel_offset = slave.true_offset_ns - master.true_offset_ns
    q = link.quantization_ns
    t1 = _quantize(epoch_ns, q)
    t2 = _quantize(t1 + link.delay_forward_ns + rel_offset + (_noise(slave.jitter_ns_rms) if noisy else 0.0), q)
    t3 = _quantize(t2 + turnaround_ns, q)
    t4 = _quantize(
        t3 - rel_offset + link.delay_backward_ns + (_noise(master.jitter_ns_rms) if noisy else 0.0), q
    )
    return WrTimestampQuartet(t1, t2, t3, t4)


def compute_delay_offset(quartet: WrTimestampQuartet) -> tuple[float, float]:
    """Line delay and slave offset recovered from one quartet.

    A negative delay is reported as-is; it flags gross asymmetry or noise
    rather than being masked.
    """
    delay = ((quartet.t4 - quartet.t1) - (quartet.t3 - quartet.t2)) / 2.0
    offset = (quartet.t2 - quartet.t1) - delay
    return delay, offset


def servo_step(slave: SimClock, offset_ns: float, gain: float = 1.0) -> SimClock:
    """Proportional correction: the slave offset shrinks by gain * offset."""
    if not gain > 0:
        raise ValueError("gain must be > 0")
    return replace(slave, true_offset_ns=slave.true_offset_ns - gain * offset_ns)


class SessionRound(NamedTuple):
    index: int
    epoch_s: float
    quartet: WrTimestampQuartet
    delay_ns: float
    offset_ns: float
    residual_ns: float


def iter_sync_rounds(
    master: SimClock,
    slave: SimClock,
    link: LinkModel,
    n_rounds: int,
    round_interval_s: float,
    gain: float = 1.0,
    turnaround_ns: float = DEFAULT_TURNAROUND_NS,
    calib_bias_ns: float = 0.0,
    synce_locked: bool = True,
    rng: np.random.Generator | None = None,
) -> Iterator[SessionRound]:
    """Drive exchange -> recover -> servo once per round, yielding each round.

    The recorded residual is the slave clock against the reference after the
    servo correction, plus the constant calibration bias (the stand-in for
    uncompensated internal hardware delays). With synce_locked the slave
    runs at the master's rate; otherwise the relative drift accumulates
    between rounds (1 ppb adds 1 ns per second).
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if round_interval_s <= 0:
        raise ValueError("round_interval_s must be > 0")
    if rng is None:
        rng = np.random.default_rng((master.rng_seed, slave.rng_seed))
    if synce_locked:
        slave = replace(slave, drift_ppb=master.drift_ppb)

    def _rounds() -> Iterator[SessionRound]:
        nonlocal slave
        for i in range(n_rounds):
            epoch_ns = int(round(i * round_interval_s * 1e9))
            quartet = exchange(master, slave, link, epoch_ns, turnaround_ns, rng)
            delay, offset = compute_delay_offset(quartet)
            slave = servo_step(slave, offset, gain)
            residual = slave.true_offset_ns + calib_bias_ns
            yield SessionRound(i, i * round_interval_s, quartet, delay, offset, residual)
            drift_rel = slave.drift_ppb - master.drift_ppb
            if drift_rel != 0.0:
                slave = replace(
                    slave, true_offset_ns=slave.true_offset_ns + drift_rel * round_interval_s
                )

    return _rounds()


def run_sync_session(
    master: SimClock,
    slave: SimClock,
    link: LinkModel,
    n_rounds: int,
    round_interval_s: float,
    **kwargs,
) -> TimeErrorSeries:
    """Run a synchronization session and return the residual time errors,
    one sample per round."""
    residuals = np.fromiter(
        (
            r.residual_ns
            for r in iter_sync_rounds(master, slave, link, n_rounds, round_interval_s, **kwargs)
        ),
        dtype=np.float64,
        count=n_rounds,
    )
    return TimeErrorSeries(residuals, round_interval_s)


def write_session_csv(
    path,
    master: SimClock,
    slave: SimClock,
    link: LinkModel,
    n_rounds: int,
    round_interval_s: float,
    **kwargs,
) -> None:
    """Run a session and write one CSV row per round:
    round_index, epoch_s, t1..t4, D_ns, O_ns, residual_ns."""
    lines = ["round_index,epoch_s,t1,t2,t3,t4,D_ns,O_ns,residual_ns"]
    for r in iter_sync_rounds(master, slave, link, n_rounds, round_interval_s, **kwargs):
        q = r.quartet
        lines.append(
            f"{r.index},{float(r.epoch_s)!r},{q.t1},{q.t2},{q.t3},{q.t4},"
            f"{float(r.delay_ns)!r},{float(r.offset_ns)!r},{float(r.residual_ns)!r}"
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
