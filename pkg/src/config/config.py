"""
Project configuration settings.
"""
import os
import zlib
import configparser
from typing import Dict, Any, Optional, Tuple, Callable

import numpy as np

from ..errors import ConfigError


def derive_seed(root_seed: int, *names: Any) -> int:
    """
    Derives a named random stream seed from the root seed.

    Args:
        root_seed: Root seed of the run
        names: Stream path, e.g. ('model', 'ridge', 3)

    Returns:
        int: 32-bit seed
    """
    keys = [zlib.crc32(str(name).encode('utf-8')) for name in names]
    return int(np.random.SeedSequence([int(root_seed) & 0xFFFFFFFF, *keys]).generate_state(1)[0])


def _env_seed() -> Optional[int]:
    value = os.getenv('UFRKIT_SEED')
    if value is None or not value.strip():
        return None
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"UFRKIT_SEED must be an integer, got {value!r}") from e


class Config:
    """
    Application configuration.

    Class attributes hold the environment-driven defaults. ``Config.load``
    returns an instance whose attributes overlay values read from an INI file.
    """

    # Output settings
    OUTPUT_DIR = os.getenv('UFRKIT_OUTPUT_DIR', 'output')
    SEED = 20240601

    # Logging settings
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('UFRKIT_LOG_FILE', 'logs/ufrkit.log')
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    # Smith-Wilson settings (SDF/SFR/SYC use a fixed alpha)
    ALPHA = float(os.getenv('UFRKIT_ALPHA', '0.1'))
    ALPHA_BAR = None

    # ZJW settings
    F_PRIOR = float(os.getenv('UFRKIT_F_PRIOR', '0.045'))
    LAMBDA = 1.0
    ALPHA_MIN = 0.05
    CONVERGENCE_POINT = 60.0
    FORWARD_GAP_TOL = 1e-4
    ALPHA_LO = 0.05
    ALPHA_HI = 1.0
    ALPHA_STEP = 0.001
    ROOT_LO = 1e-4
    ROOT_HI = 0.20

    # Lambda calibration
    LAMBDA_LO = 1e-2
    LAMBDA_HI = 1e4
    LAMBDA_POINTS = 61

    # Rolling forecast settings
    WINDOW_FRAC = float(os.getenv('UFRKIT_WINDOW_FRAC', '0.75'))
    HORIZON = 1

    # Neural network defaults
    MLP_EPOCHS = 500
    MLP_LR = 1e-3
    MLP_L2 = 1e-4
    MLP_BATCH_SIZE = 0

    # Attribution
    SHAP_PERMUTATIONS = 200

    # Synthetic data
    SYNTH_MONTHS = 240
    SYNTH_UFR_START = 0.04
    SYNTH_UFR_DRIFT = 0.0
    SYNTH_UFR_VOL = 0.001
    SYNTH_XI_NOISE = 1.0
    SYNTH_SIGNAL = 1.0
    SYNTH_VARS_PER_GROUP = 2

    # INI key -> (attribute, parser)
    _KEYS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
        'seed': ('SEED', int),
        'output_dir': ('OUTPUT_DIR', str),
        'log_level': ('LOG_LEVEL', str),
        'alpha': ('ALPHA', float),
        'alpha_bar': ('ALPHA_BAR', float),
        'f_prior': ('F_PRIOR', float),
        'lambda': ('LAMBDA', float),
        'alpha_min': ('ALPHA_MIN', float),
        'convergence_point': ('CONVERGENCE_POINT', float),
        'forward_gap_tol': ('FORWARD_GAP_TOL', float),
        'alpha_lo': ('ALPHA_LO', float),
        'alpha_hi': ('ALPHA_HI', float),
        'alpha_step': ('ALPHA_STEP', float),
        'root_lo': ('ROOT_LO', float),
        'root_hi': ('ROOT_HI', float),
        'lambda_lo': ('LAMBDA_LO', float),
        'lambda_hi': ('LAMBDA_HI', float),
        'lambda_points': ('LAMBDA_POINTS', int),
        'window_frac': ('WINDOW_FRAC', float),
        'horizon': ('HORIZON', int),
        'mlp_epochs': ('MLP_EPOCHS', int),
        'mlp_lr': ('MLP_LR', float),
        'mlp_l2': ('MLP_L2', float),
        'mlp_batch_size': ('MLP_BATCH_SIZE', int),
        'shap_permutations': ('SHAP_PERMUTATIONS', int),
        'synth_months': ('SYNTH_MONTHS', int),
        'synth_ufr_start': ('SYNTH_UFR_START', float),
        'synth_ufr_drift': ('SYNTH_UFR_DRIFT', float),
        'synth_ufr_vol': ('SYNTH_UFR_VOL', float),
        'synth_xi_noise': ('SYNTH_XI_NOISE', float),
        'synth_signal': ('SYNTH_SIGNAL', float),
        'synth_vars_per_group': ('SYNTH_VARS_PER_GROUP', int),
    }

    @classmethod
    def load(cls, path: Optional[str] = None) -> 'Config':
        """
        Builds a configuration, overlaying an INI file on the defaults.

        Args:
            path: Flat key-value file with a ``[ufrkit]`` section (optional)

        Returns:
            Config: Configuration instance

        Raises:
            ConfigError: Unreadable file, unknown key or unparseable value
        """
        config = cls()
        if not path:
            return config
        parser = configparser.ConfigParser()
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                parser.read_file(handle)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e

        for section in parser.sections():
            for key, raw in parser.items(section):
                config.set_value(key, raw)
        return config

    def set_value(self, key: str, raw: Any) -> None:
        """Sets one value by its INI key, parsing strings."""
        if key not in self._KEYS:
            raise ConfigError(f"Unknown configuration key: {key}")
        attribute, parse = self._KEYS[key]
        try:
            value = parse(raw.strip()) if isinstance(raw, str) else parse(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid value for {key}: {raw!r}") from e
        if key == 'horizon' and value != 1:
            raise ConfigError(f"Only one-step-ahead forecasts are supported, got horizon={value}")
        setattr(self, attribute, value)

    def resolve_seed(self, cli_seed: Optional[int] = None) -> int:
        """
        Resolves the root seed: defaults < file < CLI flag < UFRKIT_SEED.

        Args:
            cli_seed: Seed given on the command line

        Returns:
            int: Effective seed
        """
        env_seed = _env_seed()
        if env_seed is not None:
            return env_seed
        if cli_seed is not None:
            return int(cli_seed)
        return int(self.SEED)

    def get_zjw_config(self) -> Dict[str, Any]:
        """Returns ZJW extraction configuration."""
        return {
            'f_prior': self.F_PRIOR,
            'lam': self.LAMBDA,
            'alpha_min': self.ALPHA_MIN,
            'convergence_point': self.CONVERGENCE_POINT,
            'forward_gap_tol': self.FORWARD_GAP_TOL,
            'alpha_grid': (self.ALPHA_LO, self.ALPHA_HI, self.ALPHA_STEP),
            'root_bracket': (self.ROOT_LO, self.ROOT_HI),
        }

    def get_calibration_config(self) -> Dict[str, Any]:
        """Returns lambda calibration grid settings."""
        return {
            'lo': self.LAMBDA_LO,
            'hi': self.LAMBDA_HI,
            'points': self.LAMBDA_POINTS,
        }

    def get_rolling_config(self) -> Dict[str, Any]:
        """Returns rolling forecast configuration."""
        return {
            'window_frac': self.WINDOW_FRAC,
            'horizon': self.HORIZON,
        }

    def get_mlp_defaults(self) -> Dict[str, Any]:
        """Returns neural network training defaults."""
        return {
            'epochs': self.MLP_EPOCHS,
            'lr': self.MLP_LR,
            'l2': self.MLP_L2,
            'batch_size': self.MLP_BATCH_SIZE or None,
        }

    def get_synth_config(self) -> Dict[str, Any]:
        """Returns synthetic data generator configuration."""
        return {
            'n_months': self.SYNTH_MONTHS,
            'ufr_start': self.SYNTH_UFR_START,
            'ufr_drift': self.SYNTH_UFR_DRIFT,
            'ufr_vol': self.SYNTH_UFR_VOL,
            'xi_noise': self.SYNTH_XI_NOISE,
            'signal_strength': self.SYNTH_SIGNAL,
            'vars_per_group': self.SYNTH_VARS_PER_GROUP,
        }
