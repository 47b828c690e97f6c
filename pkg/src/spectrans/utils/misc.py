import sys
import time
from typing import Any

import numpy as np


class StatusLine:
    """
    A single status line that is rewritten in place (typically on
    stderr), for reporting training progress.

    Updates arriving less than `min_period` seconds after the previous
    one are skipped.
    """

    def __init__(
        self, file: Any = sys.stderr, show: bool = False, min_period=0.2
    ):
        self.file = file
        self.show = show
        self.min_period = min_period
        self._last_len = 0
        self._last_time = 0.0

    def on_status(self, msg: str) -> None:
        if not self.show:
            return
        now = time.monotonic()
        if now - self._last_time < self.min_period:
            return
        self._last_time = now
        pad = max(0, self._last_len - len(msg))
        print(f"\r{msg}{' ' * pad}", end="", file=self.file, flush=True)
        self._last_len = len(msg)

    def done(self) -> None:
        if self.show and self._last_len > 0:
            print(f"\r{' ' * self._last_len}\r", end="", file=self.file)
        self._last_len = 0


def derived_seed(*parts: int) -> int:
    """
    Combine integers into a single 63-bit seed, deterministically.
    """
    seq = np.random.SeedSequence([abs(p) for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> 1)
