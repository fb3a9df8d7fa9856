"""Daily activity matrices, percentile normalization, and the ADM1 dataset file."""

import datetime as dt
import enum
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

HOURS = 24
N_SENSORS = 8
MAGIC = b"ADM1"


class Label(enum.IntEnum):
    NOT_AGITATION = 0
    AGITATION = 1
    UNLABELLED = 255


@dataclass
class DailyActivityMatrix:
    home_id: str
    date: dt.date
    counts: np.ndarray
    label: Label = Label.UNLABELLED

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.shape != (HOURS, N_SENSORS):
            raise ValidationError(f"activity matrix must be 24x8, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValidationError("activity counts must be non-negative")
        self.label = Label(self.label)

    @property
    def labelled(self):
        return self.label != Label.UNLABELLED

    def __eq__(self, other):
        return (isinstance(other, DailyActivityMatrix) and self.home_id == other.home_id
                and self.date == other.date and self.label == other.label
                and np.array_equal(self.counts, other.counts))


def stack_counts(matrices):
    if not matrices:
        return np.zeros((0, HOURS, N_SENSORS))
    return np.stack([m.counts for m in matrices])


def labels_of(matrices):
    return np.array([int(m.label) for m in matrices], dtype=np.int64)


class Normalizer:
    """Divide each sensor column by its 99th-percentile count, then clip to [0, 1].

    Percentiles are taken over every hour of every training matrix. A sensor
    whose percentile is zero gets divisor 1.
    """

    def __init__(self, divisors):
        self.divisors = np.asarray(divisors, dtype=np.float64)

    @classmethod
    def fit(cls, counts, q=99.0):
        counts = np.asarray(counts, dtype=np.float64).reshape(-1, N_SENSORS)
        if counts.shape[0] == 0:
            return cls(np.ones(N_SENSORS))
        d = np.percentile(counts, q, axis=0)
        d[d <= 0] = 1.0
        return cls(d)

    def __call__(self, counts):
        return np.clip(np.asarray(counts, dtype=np.float64) / self.divisors, 0.0, 1.0)


def normalize(matrix, normalizer):
    return normalizer(matrix.counts)


def dumps_dataset(matrices):
    out = [MAGIC, struct.pack("<I", len(matrices))]
    for m in matrices:
        hid = m.home_id.encode("utf-8")
        out.append(struct.pack("<H", len(hid)))
        out.append(hid)
        out.append(m.date.isoformat().encode("ascii"))
        out.append(struct.pack("<B", int(m.label)))
        out.append(np.ascontiguousarray(m.counts, dtype="<f8").tobytes())
    return b"".join(out)


def loads_dataset(blob):
    """Inverse of ``dumps_dataset``.

    Record layout: uint16 home-id length, home-id bytes, 10-byte ISO date,
    label byte (0, 1 or 255), then 192 little-endian float64 counts in
    hour-major order.
    """
    if blob[:4] != MAGIC:
        raise ValidationError("not an ADM1 dataset (bad magic)")
    (count,) = struct.unpack_from("<I", blob, 4)
    pos = 8
    out = []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        home = blob[pos:pos + n].decode("utf-8")
        pos += n
        date = dt.date.fromisoformat(blob[pos:pos + 10].decode("ascii"))
        pos += 10
        label = blob[pos]
        pos += 1
        counts = np.frombuffer(blob, dtype="<f8", count=HOURS * N_SENSORS, offset=pos)
        pos += 8 * HOURS * N_SENSORS
        out.append(DailyActivityMatrix(home, date, counts.reshape(HOURS, N_SENSORS).astype(np.float64), label))
    if pos != len(blob):
        raise ValidationError(f"trailing bytes in dataset: {len(blob) - pos}")
    return out


def save_dataset(path, matrices):
    with open(path, "wb") as fh:
        fh.write(dumps_dataset(matrices))


def load_dataset(path):
    with open(path, "rb") as fh:
        return loads_dataset(fh.read())
