"""Sensor event logs and hourly aggregation into daily activity matrices."""

import csv
import datetime as dt
import io
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .matrix import DailyActivityMatrix, Label

SENSORS = ("bathroom", "hallway", "bedroom", "lounge", "kitchen", "fridge-door", "kettle", "microwave")
SENSOR_INDEX = {name: i for i, name in enumerate(SENSORS)}


@dataclass(frozen=True)
class SensorEvent:
    timestamp: dt.datetime
    home_id: str
    sensor: str

    @property
    def hour(self):
        return self.timestamp.hour


def parse_timestamp(text):
    """ISO-8601 instant; a trailing ``Z`` or a missing offset both mean UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = dt.datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def format_timestamp(ts):
    return ts.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_event_log(source):
    """Parse ``timestamp,home_id,sensor`` lines, preserving input order.

    ``source`` may be bytes, text, or a binary/text file object. An optional
    header row ``timestamp,home_id,sensor`` is skipped.
    """
    if isinstance(source, (bytes, bytearray)):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    elif isinstance(source, io.BufferedIOBase) or "b" in getattr(source, "mode", ""):
        source = io.TextIOWrapper(source, encoding="utf-8")
    events = []
    for lineno, row in enumerate(csv.reader(source), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if lineno == 1 and [c.strip() for c in row] == ["timestamp", "home_id", "sensor"]:
            continue
        if len(row) != 3:
            raise ValidationError(f"line {lineno}: expected 3 fields, got {len(row)}")
        stamp, home, sensor = (c.strip() for c in row)
        if sensor not in SENSOR_INDEX:
            raise ValidationError(f"line {lineno}: unknown sensor {sensor!r}")
        if not home:
            raise ValidationError(f"line {lineno}: empty home id")
        try:
            ts = parse_timestamp(stamp)
        except ValueError:
            raise ValidationError(f"line {lineno}: malformed timestamp {stamp!r}") from None
        events.append(SensorEvent(ts, home, sensor))
    return events


def write_event_log(events, fh):
    fh.write("timestamp,home_id,sensor\n")
    for e in sorted(events, key=lambda e: (e.home_id, e.timestamp, SENSOR_INDEX[e.sensor])):
        fh.write(f"{format_timestamp(e.timestamp)},{e.home_id},{e.sensor}\n")


def aggregate_hourly(events, home_id, date):
    """Count events per (hour, sensor) for one home and UTC date."""
    counts = np.zeros((24, len(SENSORS)))
    for e in events:
        if e.home_id == home_id and e.timestamp.date() == date:
            counts[e.hour, SENSOR_INDEX[e.sensor]] += 1
    return DailyActivityMatrix(home_id, date, counts, Label.UNLABELLED)


def aggregate_log(events):
    """All home-days present in ``events``, sorted by (home, date)."""
    grids = {}
    for e in events:
        key = (e.home_id, e.timestamp.date())
        if key not in grids:
            grids[key] = np.zeros((24, len(SENSORS)))
        grids[key][e.hour, SENSOR_INDEX[e.sensor]] += 1
    return [DailyActivityMatrix(h, d, grids[(h, d)], Label.UNLABELLED) for h, d in sorted(grids)]


def matrix_to_events(matrix, rng):
    """Expand integer counts back into events spread uniformly within each hour."""
    base = dt.datetime.combine(matrix.date, dt.time(), tzinfo=dt.timezone.utc)
    events = []
    for h in range(24):
        for s, name in enumerate(SENSORS):
            n = int(matrix.counts[h, s])
            for sec in np.sort(rng.integers(0, 3600, size=n)):
                events.append(SensorEvent(base + dt.timedelta(hours=h, seconds=int(sec)), matrix.home_id, name))
    return events
