"""
Monitoring and observability for training runs.
Sets up logging handlers, optional Sentry error tracking, and run counters.
"""

import logging
import time
from pathlib import Path
from typing import Dict, Any, Optional, Union

logger = logging.getLogger(__name__)

DEFAULT_LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Error codes that describe operator mistakes rather than defects
_USAGE_ERRORS = ('ValidationError', 'ConfigurationError', 'ContractError', 'ShapeError',
                 'TopologyError', 'EnumerationError')


def configure_logging(level: str = 'INFO', log_file: Optional[Union[str, Path]] = None,
                      fmt: str = DEFAULT_LOG_FORMAT) -> None:
    """
    Configure root logging with a console handler and an optional file handler.

    Args:
        level: Log level name
        log_file: Optional path of a log file (e.g. a run's run.log)
        fmt: Log record format
    """
    handlers = [logging.StreamHandler()]
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(str(log_file)))

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=fmt,
        handlers=handlers,
        force=True,
    )


class MonitoringConfig:
    """Configuration for run monitoring and error tracking."""

    def __init__(self, settings: Optional[type] = None):
        """
        Initialize monitoring configuration.

        Args:
            settings: Settings class from config.settings
        """
        self.settings = settings
        self.sentry_sdk = None
        self.metrics: Dict[str, Any] = {}
        self.start_time = time.time()
        self._reset_metrics()

        if settings:
            self.init_app(settings)

    def init_app(self, settings: type):
        """
        Initialize monitoring with resolved settings.

        Args:
            settings: Settings class from config.settings
        """
        self.settings = settings
        self.start_time = time.time()

        # Initialize Sentry for error tracking
        self._init_sentry(settings)

        # Initialize run counters
        self._reset_metrics()

        logger.info("Monitoring system initialized")

    def _init_sentry(self, settings: type):
        """Initialize Sentry error tracking."""
        sentry_dsn = getattr(settings, 'SENTRY_DSN', None)

        if not sentry_dsn:
            logger.info("SENTRY_DSN not configured, skipping Sentry initialization")
            return

        try:
            import sentry_sdk

            sentry_sdk.init(
                dsn=sentry_dsn,
                traces_sample_rate=0.0,
                send_default_pii=False,  # Don't send PII
                environment=getattr(settings, 'ENV', 'development'),
                release=getattr(settings, 'VERSION', 'unknown'),
                before_send=self._filter_sentry_events,
            )

            self.sentry_sdk = sentry_sdk
            logger.info("Sentry error tracking initialized")

        except ImportError:
            logger.warning("sentry-sdk not installed, error tracking disabled")
        except Exception as e:
            logger.error(f"Failed to initialize Sentry: {e}")

    def _filter_sentry_events(self, event: Dict[str, Any], hint: Dict[str, Any]) -> Optional[Dict[str, Any]]:
        """
        Filter Sentry events.

        Args:
            event: Sentry event data
            hint: Sentry hint data

        Returns:
            Filtered event data or None to drop the event
        """
        # Usage errors are expected, not defects
        if 'exception' in event:
            for exception in event['exception'].get('values', []):
                if exception.get('type', '') in _USAGE_ERRORS:
                    return None

        # Feature arrays never leave the process
        extra = event.get('extra')
        if isinstance(extra, dict):
            for key in list(extra):
                if key in ('features', 'batch', 'x'):
                    extra[key] = '[Filtered]'

        return event

    def _reset_metrics(self):
        self.metrics = {
            'iterations_total': 0,
            'epochs_total': 0,
            'nan_events': 0,
            'samples_mixed': 0,
            'empty_prior_batches': 0,
            'epoch_seconds': [],
        }

    def capture_exception(self, error: BaseException):
        """Forward an exception to Sentry when it is active."""
        if self.sentry_sdk:
            self.sentry_sdk.capture_exception(error)

    def track_custom_metric(self, metric_name: str, value: float = 1, tags: Optional[list] = None):
        """
        Track custom metric.

        Args:
            metric_name: Name of the metric
            value: Metric value; counters are incremented, lists appended
            tags: Optional tags for the metric
        """
        tags = tags or []

        current = self.metrics.get(metric_name)
        if isinstance(current, list):
            current.append(value)
        else:
            self.metrics[metric_name] = (current or 0) + value

        logger.debug(f"Metric: {metric_name} = {value}, tags: {tags}")

    def get_run_metrics(self) -> Dict[str, Any]:
        """
        Get current run metrics.

        Returns:
            Dictionary of run metrics
        """
        epoch_seconds = self.metrics.get('epoch_seconds', [])
        avg_epoch = sum(epoch_seconds) / len(epoch_seconds) if epoch_seconds else 0.0

        return {
            'iterations_total': self.metrics.get('iterations_total', 0),
            'epochs_total': self.metrics.get('epochs_total', 0),
            'nan_events': self.metrics.get('nan_events', 0),
            'samples_mixed': self.metrics.get('samples_mixed', 0),
            'empty_prior_batches': self.metrics.get('empty_prior_batches', 0),
            'avg_epoch_seconds': round(avg_epoch, 3),
            'uptime_seconds': time.time() - self.start_time,
        }


# Global monitoring instance
monitoring = MonitoringConfig()


def init_monitoring(settings: type, log_file: Optional[Union[str, Path]] = None) -> MonitoringConfig:
    """
    Initialize logging and monitoring from settings.

    Args:
        settings: Settings class from config.settings
        log_file: Optional log file overriding settings.LOG_FILE

    Returns:
        The global monitoring instance
    """
    configure_logging(
        level=getattr(settings, 'LOG_LEVEL', 'INFO'),
        log_file=log_file or getattr(settings, 'LOG_FILE', None),
        fmt=getattr(settings, 'LOG_FORMAT', DEFAULT_LOG_FORMAT),
    )
    monitoring.init_app(settings)
    return monitoring
