import os
import platform
from contextlib import contextmanager
from typing import Dict, Iterator, Optional, Union

import psutil

from enhancer.utils.logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)


class CPUInfoCollector:
    """A class to describe the host CPU a benchmark ran on"""

    def __init__(self):
        self.platform = platform.system()

    def _get_frequency(self) -> Optional[float]:
        try:
            freq = psutil.cpu_freq()
            if freq:
                return float(freq.current)
        except Exception as e:
            logger.debug(f"CPU frequency unavailable: {e}")
        return None

    def get_snapshot(self) -> Dict[str, Union[str, int, float, None]]:
        """Get a CPU description for the current platform

        Returns:
            Dict with the following keys (values may be None if unavailable):
            - processor: processor string reported by the platform
            - platform: operating system name
            - logical_cores: logical CPU count
            - physical_cores: physical core count
            - frequency_mhz: current CPU frequency in MHz
            - usage_percent: CPU usage percentage at snapshot time
        """
        snapshot = {
            "processor": platform.processor() or platform.machine() or None,
            "platform": self.platform,
            "logical_cores": psutil.cpu_count(logical=True),
            "physical_cores": psutil.cpu_count(logical=False),
            "frequency_mhz": self._get_frequency(),
            "usage_percent": None,
        }
        try:
            snapshot["usage_percent"] = psutil.cpu_percent(interval=0.1)
        except Exception as e:
            logger.debug(f"CPU usage unavailable: {e}")
        return snapshot


@contextmanager
def single_core(enabled: bool = True) -> Iterator[Optional[int]]:
    """
    Pin the current process to one CPU for the duration of the block.

    Yields the pinned core index, or None when pinning is disabled or the
    platform has no affinity support (macOS); the previous affinity is restored.
    """
    if not enabled:
        yield None
        return

    process = psutil.Process(os.getpid())
    if not hasattr(process, "cpu_affinity"):
        logger.warning("CPU affinity not supported on this platform, timing without pinning")
        yield None
        return

    try:
        previous = process.cpu_affinity()
        core = previous[0]
        process.cpu_affinity([core])
    except (psutil.Error, OSError, IndexError) as e:
        logger.warning(f"Could not pin to a single core: {e}")
        yield None
        return

    logger.debug(f"Pinned benchmark to CPU {core}")
    try:
        yield core
    finally:
        try:
            process.cpu_affinity(previous)
        except (psutil.Error, OSError) as e:
            logger.warning(f"Could not restore CPU affinity: {e}")
