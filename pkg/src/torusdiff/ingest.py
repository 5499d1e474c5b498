"""Conversion of planar (x, y) tracks into angle paths.

Each track is a time series of positions around a center at the origin.
Missing coordinates are filled by linear interpolation in time, positions
become angles through ``atan2(y, x)`` and the series is resampled onto a
uniform grid at the most common sampling interval.
"""

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .diffusion import PathSample
from .exceptions import DomainError
from .special import TWO_PI

MAX_MISSING_FRACTION = 0.05
# relative gap deviation, and the fraction of such gaps, that trigger a warning
GAP_TOLERANCE = 0.10
GAP_WARN_FRACTION = 0.01


class IngestWarning(UserWarning):
    """Irregular sampling or other recoverable issues in a track file."""


@dataclass
class TrackData:
    """One raw track: positions, the missing mask and the derived angles."""

    track_id: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    missing: np.ndarray
    angles: np.ndarray = None

    @property
    def missing_fraction(self):
        return float(np.mean(self.missing)) if self.missing.size else 0.0


@dataclass
class IngestReport:
    """Accepted paths plus per-track bookkeeping."""

    paths: list = field(default_factory=list)
    tracks: list = field(default_factory=list)
    rejected: dict = field(default_factory=dict)
    immobile: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def accepted(self):
        return [p.labels["id"] for p in self.paths]

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "immobile": self.immobile,
            "missing_fraction": {t.track_id: t.missing_fraction for t in self.tracks},
            "delta": {p.labels["id"]: p.delta for p in self.paths},
            "warnings": self.warnings,
        }


def _read(source):
    if isinstance(source, pd.DataFrame):
        return source.copy()
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    try:
        return pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as exc:
        raise DomainError(f"unparseable track file: {exc}") from None


def _numeric(frame, col):
    raw = frame[col].astype(str).str.strip()
    blank = raw.isin(["", "nan", "NaN", "NA", "null"])
    vals = pd.to_numeric(raw.where(~blank), errors="coerce")
    bad = vals.isna() & ~blank
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise DomainError(f"unparseable value {raw[bad].iloc[0]!r} in column {col!r} (line {row})")
    return vals.to_numpy(dtype=float)


def modal_spacing(t):
    """Most common sampling interval (rounded to 9 significant digits)."""
    gaps = np.diff(t)
    keys = np.array([float(f"{g:.9g}") for g in gaps])
    vals, counts = np.unique(keys, return_counts=True)
    return float(vals[np.argmax(counts)])


def angular_variation(angles):
    """Total absolute wrapped angular displacement along a sequence."""
    d = np.diff(angles)
    return float(np.sum(np.abs(np.mod(d + np.pi, TWO_PI) - np.pi)))


def _resample(t, angles, delta):
    # nearest observation to each point of the uniform grid
    m = int(math.floor((t[-1] - t[0]) / delta + 1e-9))
    grid = t[0] + delta * np.arange(m + 1)
    idx = np.clip(np.searchsorted(t, grid), 1, t.size - 1)
    left = grid - t[idx - 1] <= t[idx] - grid
    return angles[np.where(left, idx - 1, idx)]


def ingest_tracks(source, max_missing_fraction=MAX_MISSING_FRACTION, immobile_floor=np.pi / 2):
    """Read tracks with columns ``t, x, y`` (and optionally ``id``).

    Parameters
    ----------
    source : path, CSV text or DataFrame
    max_missing_fraction : float
        Tracks with a larger fraction of rows missing x or y are rejected.
    immobile_floor : float
        Tracks whose total angular variation (radians) is below this are
        flagged as immobile; they are kept.

    Returns
    -------
    IngestReport
        ``paths`` holds one :class:`PathSample` per accepted track with
        ``labels["id"]`` set; ``rejected`` maps track ids to reasons.

    Raises
    ------
    DomainError
        Missing columns, unparseable values, or timestamps that are not
        strictly increasing within a track.
    """
    if not 0 <= max_missing_fraction < 1:
        raise DomainError("max_missing_fraction must lie in [0, 1)")
    frame = _read(source)
    frame.columns = [c.strip().lower() for c in frame.columns]
    missing_cols = {"t", "x", "y"} - set(frame.columns)
    if missing_cols:
        raise DomainError(f"track file lacks columns {sorted(missing_cols)}")
    ids = frame["id"].astype(str).str.strip().to_numpy() if "id" in frame.columns else np.full(len(frame), "1")
    t_all = _numeric(frame, "t")
    if np.isnan(t_all).any():
        raise DomainError("every row needs a timestamp")
    x_all, y_all = _numeric(frame, "x"), _numeric(frame, "y")

    report = IngestReport()
    for tid in dict.fromkeys(ids):
        sel = ids == tid
        t, x, y = t_all[sel], x_all[sel], y_all[sel]
        if np.any(np.diff(t) <= 0):
            raise DomainError(f"timestamps of track {tid!r} are not strictly increasing")
        miss = np.isnan(x) | np.isnan(y)
        track = TrackData(tid, t, x, y, miss)
        report.tracks.append(track)
        if track.missing_fraction > max_missing_fraction:
            report.rejected[tid] = (f"missing fraction {track.missing_fraction:.3f} exceeds "
                                    f"{max_missing_fraction:.3f}")
            continue
        if t.size - miss.sum() < 2 or t.size < 2:
            report.rejected[tid] = "fewer than two observed positions"
            continue
        ok = ~miss
        xi = np.interp(t, t[ok], x[ok])
        yi = np.interp(t, t[ok], y[ok])
        angles = np.mod(np.arctan2(yi, xi), TWO_PI)
        track.angles = angles
        delta = modal_spacing(t)
        dev = np.abs(np.diff(t) - delta) > GAP_TOLERANCE * delta
        if dev.mean() > GAP_WARN_FRACTION:
            msg = (f"track {tid!r}: {dev.mean():.1%} of sampling gaps deviate by more than "
                   f"{GAP_TOLERANCE:.0%} from the modal spacing {delta:g}; resampled to nearest neighbours")
            report.warnings.append(msg)
            warnings.warn(msg, IngestWarning, stacklevel=2)
        resampled = _resample(t, angles, delta) if dev.any() else angles
        if angular_variation(resampled) < immobile_floor:
            report.immobile.append(tid)
        report.paths.append(PathSample(delta, resampled, labels={"id": tid}))
    return report
