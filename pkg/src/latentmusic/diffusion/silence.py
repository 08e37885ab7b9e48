"""Trailing-silence trimming for variable-length generation output."""

from __future__ import annotations

import numpy as np

from ..audio import Waveform, rms_dbfs


def trim_trailing_silence(w: Waveform, threshold_db: float = -60.0, hold_ms: float = 100.0) -> Waveform:
    """Remove the maximal trailing region that stays below ``threshold_db``.

    The tail is scanned in ``hold_ms`` windows from the end; a window at or
    above the threshold stops the trim. Leading/interior content is never
    removed; an all-silent input keeps at least one window.
    """
    win = max(1, int(round(w.sample_rate * hold_ms / 1000.0)))
    data = w.data
    end = data.shape[1]
    while end - win >= 0:
        if rms_dbfs(data[:, end - win : end]) < threshold_db:
            end -= win
        else:
            break
    if end <= 0:
        end = min(win, data.shape[1])
    return Waveform(np.ascontiguousarray(data[:, :end]), w.sample_rate)
