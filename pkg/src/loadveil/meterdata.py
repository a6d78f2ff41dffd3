"""Energy-consumption time series: CSV I/O, synthetic generation, batching.

A meter reports real power in watts on a fixed cadence (default one reading
every 900 s, i.e. 15 minutes). Readings are handled in batches of ``t``
consecutive slots; a day of 15-minute slots (t=96) is the default batch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from ._rng import derive_rng

DEFAULT_PERIOD_SECONDS = 900
DEFAULT_BATCH_LENGTH = 96

CSV_HEADER = ("meter_id", "timestamp", "watts")
TRUTH_CSV_HEADER = ("meter_id", "batch_index", "appliance_name", "states")


class MeterCsvError(ValueError):
    """Malformed meter CSV content. ``line`` is the 1-based file line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def parse_timestamp(text: str) -> datetime:
    # Python 3.10 fromisoformat does not accept a trailing Z.
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class ReadingBatch:
    """One batch of ``t`` consecutive nonnegative power readings (watts)."""

    meter_id: str
    start_time: datetime
    values: np.ndarray
    period_seconds: int = DEFAULT_PERIOD_SECONDS

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"a batch needs at least 2 readings, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("readings must be finite")
        if np.any(arr < 0):
            raise ValueError(f"readings must be nonnegative (min {arr.min()})")
        if int(self.period_seconds) <= 0:
            raise ValueError(f"period_seconds must be positive, got {self.period_seconds}")
        start = self.start_time
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_time", start.astimezone(timezone.utc))
        object.__setattr__(self, "period_seconds", int(self.period_seconds))

    @property
    def t(self) -> int:
        return self.values.size

    def timestamps(self) -> list[datetime]:
        step = timedelta(seconds=self.period_seconds)
        return [self.start_time + k * step for k in range(self.t)]


@dataclass(frozen=True)
class ApplianceProfile:
    """Synthetic appliance: alternating ON/OFF renewal process with jitter.

    ON and OFF dwell times are geometric in whole slots with the given means
    (means below one slot are unrepresentable). While ON the appliance draws
    ``rated_power_watts * (1 + u)`` with u uniform in [-jitter, +jitter].
    """

    name: str
    rated_power_watts: float
    mean_on_duration_slots: float
    mean_off_duration_slots: float
    power_jitter_fraction: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("appliance name must be nonempty")
        if not self.rated_power_watts > 0:
            raise ValueError(f"rated_power_watts must be > 0, got {self.rated_power_watts}")
        for label, mean in (("mean_on_duration_slots", self.mean_on_duration_slots),
                            ("mean_off_duration_slots", self.mean_off_duration_slots)):
            if not mean >= 1.0:
                raise ValueError(f"{label} must be >= 1 slot, got {mean}")
        if not 0.0 <= self.power_jitter_fraction < 1.0:
            raise ValueError(
                f"power_jitter_fraction must be in [0, 1), got {self.power_jitter_fraction}")


@dataclass(frozen=True)
class GroundTruthStates:
    """Per-slot ON/OFF states of one appliance, paired with a ReadingBatch."""

    appliance_name: str
    states: np.ndarray

    def __post_init__(self):
        arr = np.array(self.states, dtype=bool)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"states must be a nonempty 1-D sequence, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)


def _dwell_states(rng: np.random.Generator, profile: ApplianceProfile, n_slots: int) -> np.ndarray:
    """Alternating-renewal ON/OFF sequence; initial state drawn stationary."""
    mean_on = profile.mean_on_duration_slots
    mean_off = profile.mean_off_duration_slots
    on = rng.random() < mean_on / (mean_on + mean_off)
    out = np.empty(n_slots, dtype=bool)
    pos = 0
    while pos < n_slots:
        dwell = int(rng.geometric(1.0 / (mean_on if on else mean_off)))
        end = min(pos + dwell, n_slots)
        out[pos:end] = on
        pos = end
        on = not on
    return out


def generate_synthetic(
    profiles: list[ApplianceProfile],
    t: int,
    batches: int,
    seed: int,
    *,
    meter_id: str = "synth-0",
    start_time: datetime | None = None,
    period_seconds: int = DEFAULT_PERIOD_SECONDS,
) -> tuple[list[ReadingBatch], list[list[GroundTruthStates]]]:
    """Simulate aggregate readings plus per-appliance ground truth.

    The simulation runs over one contiguous horizon of ``t * batches`` slots,
    then slices it into batches, so consecutive batches are continuous in
    time. Each reading is the exact sum of the appliances' instantaneous
    draws. Pure function of (profiles, t, batches, seed) plus keywords.

    Returns
    -------
    (readings, truth)
        ``readings[b]`` is the b-th ReadingBatch; ``truth[b]`` lists one
        GroundTruthStates per appliance, in profile order.
    """
    if not profiles:
        raise ValueError("at least one appliance profile is required")
    if t < 2:
        raise ValueError(f"batch length t must be >= 2, got {t}")
    if batches < 1:
        raise ValueError(f"batches must be >= 1, got {batches}")
    if start_time is None:
        start_time = datetime(2020, 1, 1, tzinfo=timezone.utc)

    rng = derive_rng(seed)
    total = t * batches
    states_by_appliance: list[np.ndarray] = []
    values = np.zeros(total)
    for profile in profiles:
        states = _dwell_states(rng, profile, total)
        draw = states * profile.rated_power_watts
        if profile.power_jitter_fraction > 0:
            j = profile.power_jitter_fraction
            draw = draw * (1.0 + rng.uniform(-j, j, size=total))
        values += draw
        states_by_appliance.append(states)

    step = timedelta(seconds=period_seconds * t)
    reading_batches = []
    truth: list[list[GroundTruthStates]] = []
    for b in range(batches):
        sl = slice(b * t, (b + 1) * t)
        reading_batches.append(ReadingBatch(
            meter_id=meter_id,
            start_time=start_time + b * step,
            values=values[sl],
            period_seconds=period_seconds,
        ))
        truth.append([
            GroundTruthStates(p.name, s[sl])
            for p, s in zip(profiles, states_by_appliance)
        ])
    return reading_batches, truth


def write_csv(batches: list[ReadingBatch], path) -> None:
    """Write batches as ``meter_id,timestamp,watts`` rows (12 significant digits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for batch in batches:
            for ts, w in zip(batch.timestamps(), batch.values):
                writer.writerow([batch.meter_id, format_timestamp(ts), f"{w:.12g}"])


def load_csv(path, batch_length: int = DEFAULT_BATCH_LENGTH) -> list[ReadingBatch]:
    """Load reading batches from a CSV of ``meter_id,timestamp,watts`` rows.

    Rows must be grouped by meter and time-ordered within each meter.
    Consecutive rows with uniform spacing form a run; each run is cut into
    batches of ``batch_length`` slots. A shorter trailing group is returned
    as-is (its length below ``batch_length`` flags it as partial); a stranded
    single reading cannot form a batch and raises MeterCsvError.

    The header row is optional on input (it is always written by write_csv).
    """
    if batch_length < 2:
        raise ValueError(f"batch_length must be >= 2, got {batch_length}")

    # (meter, start_ts, period_s, values, first_line)
    runs: list[tuple[str, datetime, int, list[float], int]] = []
    run_meter: str | None = None
    run_start: datetime | None = None
    run_period: int | None = None
    run_values: list[float] = []
    run_line = 0
    finished_meters: set[str] = set()
    last_ts: datetime | None = None
    lineno = 0

    def close_run(line: int):
        nonlocal run_meter, run_start, run_period, run_values, run_line
        if run_meter is None:
            return
        if len(run_values) < 2:
            raise MeterCsvError(
                f"a single reading for meter {run_meter!r} cannot form a batch "
                "(2 consecutive uniformly spaced readings minimum)", line)
        runs.append((run_meter, run_start, run_period, run_values, run_line))
        run_meter = None
        run_start = None
        run_period = None
        run_values = []

    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and [c.strip().lower() for c in row] == list(CSV_HEADER):
                continue
            if len(row) != 3:
                raise MeterCsvError(f"expected 3 fields meter_id,timestamp,watts, got {len(row)}",
                                    lineno)
            meter, ts_text, watts_text = (c.strip() for c in row)
            if not meter:
                raise MeterCsvError("empty meter_id", lineno)
            try:
                ts = parse_timestamp(ts_text)
            except ValueError:
                raise MeterCsvError(f"unparseable timestamp {ts_text!r}", lineno) from None
            try:
                watts = float(watts_text)
            except ValueError:
                raise MeterCsvError(f"unparseable watts value {watts_text!r}", lineno) from None
            if not np.isfinite(watts):
                raise MeterCsvError(f"non-finite watts value {watts_text}", lineno)
            if watts < 0:
                raise MeterCsvError(f"negative watts value {watts}", lineno)

            if meter != run_meter:
                prev_meter = run_meter
                close_run(lineno)
                if prev_meter is not None:
                    finished_meters.add(prev_meter)
                if meter in finished_meters:
                    raise MeterCsvError(f"rows for meter {meter!r} are not contiguous", lineno)
                run_meter = meter
                run_start = ts
                run_values = [watts]
                run_line = lineno
                last_ts = ts
                continue

            delta = (ts - last_ts).total_seconds()
            if delta <= 0:
                raise MeterCsvError(
                    f"non-monotone timestamps within meter {meter!r} "
                    f"({format_timestamp(ts)} follows {format_timestamp(last_ts)})", lineno)
            if abs(delta - round(delta)) > 1e-9:
                raise MeterCsvError(f"reading spacing must be whole seconds, got {delta}", lineno)
            delta = int(round(delta))
            last_ts = ts

            if run_period is None:
                run_period = delta
                run_values.append(watts)
            elif delta == run_period:
                run_values.append(watts)
            else:
                # spacing changed: current run ends, this row opens a new one
                close_run(lineno)
                run_meter = meter
                run_start = ts
                run_values = [watts]
                run_line = lineno
        close_run(lineno)

    batches: list[ReadingBatch] = []
    for meter, start, period, values, first_line in runs:
        step = timedelta(seconds=period)
        for offset in range(0, len(values), batch_length):
            chunk = values[offset:offset + batch_length]
            if len(chunk) == 1:
                raise MeterCsvError(
                    f"trailing single reading for meter {meter!r} cannot form a batch",
                    first_line + offset)
            batches.append(ReadingBatch(
                meter_id=meter,
                start_time=start + offset * step,
                values=chunk,
                period_seconds=period,
            ))
    return batches


def write_truth_csv(truth: list[list[GroundTruthStates]], path, meter_id: str = "synth-0") -> None:
    """Write ground-truth states, one row per (batch, appliance), states as a 0/1 string."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRUTH_CSV_HEADER)
        for b, per_appliance in enumerate(truth):
            for gts in per_appliance:
                bits = "".join("1" if s else "0" for s in gts.states)
                writer.writerow([meter_id, b, gts.appliance_name, bits])


def load_truth_csv(path) -> list[list[GroundTruthStates]]:
    """Inverse of write_truth_csv; batches ordered by batch_index."""
    per_batch: dict[int, list[GroundTruthStates]] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and [c.strip().lower() for c in row] == list(TRUTH_CSV_HEADER):
                continue
            if len(row) != 4:
                raise MeterCsvError("expected 4 fields meter_id,batch_index,appliance_name,states",
                                    lineno)
            _, index_text, name, bits = (c.strip() for c in row)
            try:
                index = int(index_text)
            except ValueError:
                raise MeterCsvError(f"unparseable batch_index {index_text!r}", lineno) from None
            if set(bits) - {"0", "1"}:
                raise MeterCsvError("states must be a string of 0s and 1s", lineno)
            states = np.frombuffer(bits.encode(), dtype=np.uint8) == ord("1")
            per_batch.setdefault(index, []).append(GroundTruthStates(name, states))
    if per_batch and sorted(per_batch) != list(range(len(per_batch))):
        raise MeterCsvError(f"batch indices are not contiguous from 0: {sorted(per_batch)}")
    return [per_batch[i] for i in sorted(per_batch)]
