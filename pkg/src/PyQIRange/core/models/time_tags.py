"""
Time Tag Models

A detector record is (channel, flags, timestamp); bit 0 of flags holds the PBS outcome in
front of the detector (0 = transmitted / H, 1 = reflected / V). Timestamps are integer
picoseconds since the start of the run.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from PyQIRange.core.constants import Channel
from PyQIRange.core.quantum.polarization import AnalyzerSetting

FLAG_REFLECTED = 1


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    channel: int
    timestamps: np.ndarray
    flags: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        timestamps = np.asarray(self.timestamps, dtype=np.int64)
        flags = (np.zeros(timestamps.shape, dtype=np.uint32) if self.flags is None
                 else np.asarray(self.flags, dtype=np.uint32))
        if timestamps.ndim != 1 or flags.shape != timestamps.shape:
            raise ValueError("timestamps and flags must be 1-D arrays of equal length")
        timestamps.setflags(write=False)
        flags.setflags(write=False)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "flags", flags)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.timestamps) >= 0))

    def select(self, outcome: int) -> "TimeTagStream":
        """Tags whose PBS outcome bit equals `outcome`."""
        mask = (self.flags & FLAG_REFLECTED) == outcome
        return TimeTagStream(self.channel, self.timestamps[mask], self.flags[mask])

    def same_as(self, other: "TimeTagStream") -> bool:
        return (self.channel == other.channel
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.flags, other.flags))

    @classmethod
    def empty(cls, channel: int) -> "TimeTagStream":
        return cls(channel, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint32))


@dataclass(frozen=True)
class SettingRun:
    """Streams of all detectors recorded at one analyzer setting."""
    setting: AnalyzerSetting
    duration: float
    streams: Dict[int, TimeTagStream] = field(default_factory=dict)
    setting_index: int = 0

    def stream(self, channel: int) -> TimeTagStream:
        return self.streams.get(int(channel), TimeTagStream.empty(int(channel)))

    def merged_records(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(channel, flags, timestamp) of all streams, ordered by timestamp then channel."""
        channels, flags, stamps = [], [], []
        for channel in sorted(self.streams):
            s = self.streams[channel]
            channels.append(np.full(len(s), channel, dtype=np.uint32))
            flags.append(s.flags)
            stamps.append(s.timestamps)
        if not stamps:
            return (np.zeros(0, np.uint32), np.zeros(0, np.uint32), np.zeros(0, np.int64))
        channel_arr = np.concatenate(channels)
        flag_arr = np.concatenate(flags)
        stamp_arr = np.concatenate(stamps)
        order = np.lexsort((channel_arr, stamp_arr))
        return channel_arr[order], flag_arr[order], stamp_arr[order]

    def same_as(self, other: "SettingRun") -> bool:
        if self.setting != other.setting or set(self.streams) != set(other.streams):
            return False
        return all(self.streams[c].same_as(other.streams[c]) for c in self.streams)


@dataclass(frozen=True)
class RunBundle:
    """Per-setting streams of one simulated (or loaded) experiment, in plan order."""
    runs: Tuple[SettingRun, ...]
    seed: int = 0

    def __iter__(self) -> Iterator[SettingRun]:
        return iter(self.runs)

    def __len__(self) -> int:
        return len(self.runs)

    def by_setting(self) -> Dict[Tuple[float, float], SettingRun]:
        return {run.setting.key(): run for run in self.runs}

    def channel_streams(self, channel: Channel) -> List[TimeTagStream]:
        return [run.stream(channel) for run in self.runs]

    def same_as(self, other: "RunBundle") -> bool:
        return len(self) == len(other) and all(a.same_as(b) for a, b in zip(self.runs, other.runs))
