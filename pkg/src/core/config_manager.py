"""
Configuration Manager Module

This module handles loading, saving, and managing toolkit configuration.
"""

import copy
import json
import os

from enhancer.utils.logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)

# Default configuration
DEFAULT_CONFIG = {
    "logging": {
        "level": "INFO",  # DEBUG, INFO, WARNING or ERROR
        "log_to_file": False,
        "log_file_path": "enhancer.log"
    },
    "audio": {
        "write_encoding": "float32"  # "float32" or "pcm16"
    },
    "spectrum": {
        "fft_size": 8192,
        "window": "hamming"  # "hamming", "hann" or "rect"
    },
    "metrics": {
        "f0_min_hz": 50.0,
        "f0_max_hz": 1000.0,
        "max_harmonics": 10,
        "thd_fft_size": 8192,
        "warpq_patch_s": 0.5,
        "mfcc_coeffs": 13,
        "mfcc_win_s": 0.032,
        "mfcc_hop_s": 0.016,
        "reference_rate": 48000,
        "max_workers": 1
    },
    "separator": {
        "segment_s": 3.0,
        "overlap_s": 0.25,
        "parallel_workers": 0  # 0 = single-threaded forward pass
    },
    "mixer": {
        "sample_rate": 16000,
        "snr_low_db": -3.0,
        "snr_high_db": 12.0,
        "split": [0.8, 0.1, 0.1],  # train, eval, test
        "seed": 0,
        "max_workers": 1
    },
    "bench": {
        "clip_seconds": [1, 5, 10],
        "repeats": 5,
        "frame_samples": 256,  # N in the per-frame processing-time model
        "per_frame_ms": 0.4,
        "threshold_ms": 185.19,
        "pin_cpu": True
    }
}


class ConfigManager:
    """Manages toolkit configuration loading and saving"""

    def __init__(self, config_path=None):
        """
        Initialize the configuration manager.

        Args:
            config_path: Path to the configuration file. If None, uses the default location.
        """
        if config_path is None:
            self.config_path = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), 'config.json')
        else:
            self.config_path = config_path

        self.config = self.load_config()

    def load_config(self):
        """
        Load configuration from file or use defaults.

        A missing file is not created; the defaults are used as-is.

        Returns:
            dict: The loaded configuration
        """
        if not os.path.exists(self.config_path):
            logger.debug(f"No config file at {self.config_path}, using defaults")
            return copy.deepcopy(DEFAULT_CONFIG)

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise ValueError("top level must be an object")
        except Exception as e:
            logger.error(f"Error loading config: {e}. Using defaults.")
            return copy.deepcopy(DEFAULT_CONFIG)

        # Ensure all default keys exist (for compatibility with older configs)
        for section in DEFAULT_CONFIG:
            if not isinstance(config.get(section), dict):
                config[section] = copy.deepcopy(DEFAULT_CONFIG[section])
            else:
                for key in DEFAULT_CONFIG[section]:
                    if key not in config[section]:
                        config[section][key] = copy.deepcopy(DEFAULT_CONFIG[section][key])
        return config

    def get_config(self):
        """
        Get the current configuration.

        Returns:
            dict: The current configuration
        """
        return self.config

    def get_section(self, name):
        """
        Get one configuration section.

        Args:
            name: Section name, e.g. "bench"

        Returns:
            dict: The section (defaults if the section is unknown to the file)
        """
        if name not in self.config:
            return copy.deepcopy(DEFAULT_CONFIG.get(name, {}))
        return self.config[name]
