"""Progress tracking for gate benchmarks.

Provides periodic progress bars and a final summary showing:
- Gates timed vs planned
- Wall-clock mean and variance per gate kind
- Bootstrap output noise, when measured
"""

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from threading import Lock
from typing import Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class GateTiming:
    """Timings for one gate kind."""
    gate: str
    planned: int
    seconds: List[float] = field(default_factory=list)
    noise: List[int] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return len(self.seconds)

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.seconds)) * 1e3 if self.seconds else 0.0

    @property
    def variance_ms2(self) -> float:
        return float(np.var(self.seconds)) * 1e6 if self.seconds else 0.0

    @property
    def progress_percent(self) -> float:
        if self.planned == 0:
            return 100.0
        return min(100.0, self.completed / self.planned * 100)


class BenchTracker:
    """Thread-safe collector of per-gate wall-clock timings."""

    def __init__(self, params_name: str, mode: str, update_interval_seconds: int = 30):
        """Initialize the tracker.

        Args:
            params_name: Parameter set being benchmarked
            mode: Bootstrapping mode
            update_interval_seconds: Minimum seconds between progress prints
        """
        self.params_name = params_name
        self.mode = mode
        self.update_interval = update_interval_seconds
        self.start_time = time.time()
        self.last_update_time = self.start_time
        self.gates: Dict[str, GateTiming] = {}
        self._lock = Lock()

        logger.info(f"[BENCH] Tracker initialized for {params_name} {mode}")

    def add_gate(self, gate: str, planned: int):
        with self._lock:
            self.gates[gate] = GateTiming(gate=gate, planned=planned)

    def record(self, gate: str, seconds: float, noise: Optional[int] = None):
        """Record one evaluation.

        Args:
            gate: Gate name
            seconds: Wall-clock duration
            noise: Distance of the refreshed phase from its ideal value, if measured
        """
        with self._lock:
            if gate not in self.gates:
                logger.warning(f"[BENCH] Gate {gate} not registered")
                return
            timing = self.gates[gate]
            timing.seconds.append(seconds)
            if noise is not None:
                timing.noise.append(noise)

    def should_print_update(self) -> bool:
        return time.time() - self.last_update_time >= self.update_interval

    def print_progress(self, force: bool = False):
        """Print a progress bar for all registered gates."""
        if not force and not self.should_print_update():
            return

        with self._lock:
            planned = sum(g.planned for g in self.gates.values())
            done = sum(g.completed for g in self.gates.values())
            if planned == 0:
                return
            percent = done / planned * 100
            bar_width = 50
            filled = int(bar_width * percent / 100)
            bar = '█' * filled + '░' * (bar_width - filled)

            print("\n" + "=" * 80)
            print(f"BENCH PROGRESS - {datetime.now(timezone.utc).strftime('%Y-%m-%d %H:%M:%S UTC')}")
            print("=" * 80)
            print(f"[{bar}] {percent:.1f}%")
            print(f"Gates: {done:,} / {planned:,}")
            print(f"Elapsed: {time.time() - self.start_time:.1f} s")
            print("=" * 80 + "\n")
            self.last_update_time = time.time()

    def summary(self) -> dict:
        with self._lock:
            return {
                "params": self.params_name,
                "mode": self.mode,
                "elapsed_s": round(time.time() - self.start_time, 3),
                "gates": {
                    g.gate: {
                        "count": g.completed,
                        "mean_ms": round(g.mean_ms, 3),
                        "variance_ms2": round(g.variance_ms2, 3),
                        "max_noise": max(g.noise) if g.noise else None,
                    }
                    for g in self.gates.values()
                },
            }

    def print_final_summary(self):
        """Print per-gate timings at completion."""
        with self._lock:
            elapsed = time.time() - self.start_time
            print("\n" + "=" * 80)
            print(f"BENCH COMPLETE - {self.params_name} {self.mode} - {datetime.now(timezone.utc).strftime('%Y-%m-%d %H:%M:%S UTC')}")
            print("=" * 80)
            for g in self.gates.values():
                noise = f"  max noise {max(g.noise)}" if g.noise else ""
                print(f"  {g.gate:6} {g.completed:5} gates  mean {g.mean_ms:10.2f} ms  var {g.variance_ms2:12.2f} ms^2{noise}")
            print(f"Total Time: {elapsed:.1f} s")
            print("=" * 80 + "\n")


__all__ = ["GateTiming", "BenchTracker"]
