"""
Environment configuration for the logit-correction toolkit.
Handles environment variables, .env files, and per-profile defaults.
"""

import os
from typing import Dict, Any, Optional

from dotenv import load_dotenv

# Values from a .env file in the working directory are visible to the profiles below
load_dotenv()

VALID_DTYPES = ('float32', 'float64')
VALID_LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == '':
        return default
    try:
        return int(value)
    except ValueError:
        return default


class Settings:
    """Base settings read from the environment at class creation."""

    ENV = 'development'
    TESTING = False

    # Logging Configuration
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    LOG_FILE = os.getenv('LC_LOG_FILE')

    # Data and outputs
    MNIST_DIR = os.getenv('LC_MNIST_DIR', 'data/mnist')
    OUTPUT_DIR = os.getenv('LC_OUTPUT_DIR', 'runs')

    # Worker cap for data generation
    THREADS = _int_env('LC_THREADS', 1)

    # Training precision
    TRAIN_DTYPE = os.getenv('LC_TRAIN_DTYPE', 'float32')

    # Monitoring Configuration
    SENTRY_DSN = os.getenv('SENTRY_DSN')
    VERSION = os.getenv('LC_VERSION', '0.1.0')

    @classmethod
    def validate_config(cls) -> Dict[str, Any]:
        """
        Validate settings and return status.

        Returns:
            Dictionary with validation results
        """
        issues = []
        warnings = []

        if cls.TRAIN_DTYPE not in VALID_DTYPES:
            issues.append(f"LC_TRAIN_DTYPE must be one of {', '.join(VALID_DTYPES)}, got {cls.TRAIN_DTYPE}")

        if cls.LOG_LEVEL not in VALID_LOG_LEVELS:
            issues.append(f"LOG_LEVEL must be one of {', '.join(VALID_LOG_LEVELS)}, got {cls.LOG_LEVEL}")

        if cls.THREADS < 1:
            issues.append(f"LC_THREADS must be at least 1, got {cls.THREADS}")

        if not os.path.isdir(cls.MNIST_DIR):
            warnings.append(f"MNIST directory {cls.MNIST_DIR} not found, synthetic glyphs will be used")

        if cls.ENV == 'production' and not cls.SENTRY_DSN:
            warnings.append("Missing recommended environment variable: SENTRY_DSN")

        return {
            'valid': len(issues) == 0,
            'issues': issues,
            'warnings': warnings
        }

    @classmethod
    def get_config_summary(cls) -> Dict[str, Any]:
        """
        Get settings summary (without sensitive values).

        Returns:
            Dictionary with settings summary
        """
        return {
            'environment': cls.ENV,
            'log_level': cls.LOG_LEVEL,
            'mnist_dir': cls.MNIST_DIR,
            'output_dir': cls.OUTPUT_DIR,
            'threads': cls.THREADS,
            'train_dtype': cls.TRAIN_DTYPE,
            'sentry_configured': bool(cls.SENTRY_DSN),
            'version': cls.VERSION,
        }


class DevelopmentSettings(Settings):
    """Development profile."""

    ENV = 'development'
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'DEBUG').upper()

    # No error reporting from laptops
    SENTRY_DSN = None


class TestingSettings(Settings):
    """Testing profile: 64-bit numerics, quiet logs, no external services."""

    ENV = 'testing'
    TESTING = True
    LOG_LEVEL = 'WARNING'
    TRAIN_DTYPE = 'float64'
    THREADS = 1
    SENTRY_DSN = None


class ProductionSettings(Settings):
    """Production profile for long benchmark runs."""

    ENV = 'production'
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()


settings_mapping = {
    'development': DevelopmentSettings,
    'testing': TestingSettings,
    'production': ProductionSettings,
}


def get_settings(environment: Optional[str] = None) -> type:
    """
    Get settings class based on environment.

    Args:
        environment: Profile name; defaults to LC_ENVIRONMENT

    Returns:
        Settings class
    """
    env = (environment or os.getenv('LC_ENVIRONMENT', 'development')).lower()
    return settings_mapping.get(env, DevelopmentSettings)


def create_env_file(environment: str = 'development') -> str:
    """
    Create example environment file.

    Args:
        environment: Target environment (development, testing, production)

    Returns:
        String content for .env file
    """
    header = f"""# Logit-correction toolkit environment variables ({environment})
# Copy this file to .env and adjust the values

LC_ENVIRONMENT={environment}
"""

    if environment == 'production':
        return header + """
# Data
LC_MNIST_DIR=/data/mnist
LC_OUTPUT_DIR=/data/runs
LC_THREADS=8

# Precision
LC_TRAIN_DTYPE=float32

# Monitoring (Optional but recommended)
SENTRY_DSN=https://your-sentry-dsn

# Logging
LOG_LEVEL=INFO
"""

    elif environment == 'testing':
        return header + """
LC_TRAIN_DTYPE=float64
LC_THREADS=1
LOG_LEVEL=WARNING
"""

    else:  # development
        return header + """
# Data (synthetic glyphs are used if the directory is missing)
LC_MNIST_DIR=data/mnist
LC_OUTPUT_DIR=runs
LC_THREADS=2

# Logging
LOG_LEVEL=DEBUG
"""
