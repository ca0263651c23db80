"""
OpenTelemetry metrics configuration and instrumentation
Exports metrics via OTLP HTTP to a configured endpoint when OTEL_ENABLED=true;
otherwise every instrument is a no-op.
"""

import logging
import math
import os
import time
from contextlib import contextmanager
from typing import Optional

from opentelemetry import metrics
from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
from opentelemetry.exporter.otlp.proto.http.metric_exporter import OTLPMetricExporter
from opentelemetry.sdk.resources import Resource

logger = logging.getLogger(__name__)


class TelemetryManager:
    """Manages OpenTelemetry metrics for training runs and CLI commands"""

    def __init__(self):
        self.enabled = os.getenv('OTEL_ENABLED', 'false').lower() == 'true'

        if not self.enabled:
            self._setup_noop_metrics()
            return

        endpoint = os.getenv('OTEL_EXPORTER_OTLP_ENDPOINT')
        headers = os.getenv('OTEL_EXPORTER_OTLP_HEADERS', '')

        if not endpoint:
            logger.warning('OTEL_ENABLED=true but OTEL_EXPORTER_OTLP_ENDPOINT not set. Metrics disabled.')
            self.enabled = False
            self._setup_noop_metrics()
            return

        # Parse headers (format: "key1=value1,key2=value2")
        headers_dict = {}
        if headers:
            for header in headers.split(','):
                if '=' in header:
                    key, value = header.split('=', 1)
                    headers_dict[key.strip()] = value.strip()

        from . import __version__
        resource = Resource.create({
            "service.name": os.getenv('OTEL_SERVICE_NAME', 'st-deepkriging'),
            "service.version": __version__,
            "deployment.environment": os.getenv('OTEL_ENVIRONMENT', 'research'),
        })

        exporter = OTLPMetricExporter(endpoint=endpoint, headers=headers_dict)
        reader = PeriodicExportingMetricReader(
            exporter=exporter,
            export_interval_millis=int(os.getenv('OTEL_EXPORT_INTERVAL_MS', '60000'))
        )
        metrics.set_meter_provider(MeterProvider(resource=resource, metric_readers=[reader]))

        self.meter = metrics.get_meter(__name__)
        self._setup_metrics()

    def _setup_noop_metrics(self):
        """Create no-op metrics when telemetry is disabled"""
        self.meter = metrics.get_meter(__name__)
        self._setup_metrics()

    def _setup_metrics(self):
        """Initialize counters and histograms"""

        # === COUNTERS ===
        self.training_runs_counter = self.meter.create_counter(
            name="training.runs",
            description="Completed training runs by model kind",
            unit="1"
        )

        self.training_epochs_counter = self.meter.create_counter(
            name="training.epochs",
            description="Epochs run across all trainings",
            unit="1"
        )

        self.training_diverged_counter = self.meter.create_counter(
            name="training.diverged",
            description="Trainings aborted on a non-finite loss",
            unit="1"
        )

        self.cli_commands_counter = self.meter.create_counter(
            name="cli.commands",
            description="CLI command invocations by outcome",
            unit="1"
        )

        self.errors_counter = self.meter.create_counter(
            name="errors.total",
            description="Total number of errors by type",
            unit="1"
        )

        # === HISTOGRAMS ===
        self.training_duration = self.meter.create_histogram(
            name="training.duration",
            description="Training wall time in milliseconds",
            unit="ms"
        )

        self.training_final_risk = self.meter.create_histogram(
            name="training.final_risk",
            description="Training risk at the restored best epoch",
            unit="1"
        )

        self.command_duration = self.meter.create_histogram(
            name="cli.command.duration",
            description="CLI command duration in milliseconds",
            unit="ms"
        )

        self.cholesky_jitter = self.meter.create_histogram(
            name="simulation.cholesky.jitter",
            description="Diagonal jitter needed for the Cholesky factorisation, relative to sigma^2",
            unit="1"
        )

    # === Helper Methods ===

    def record_training(self, label: str, epochs: int, seconds: float, final_risk: float):
        """Record a finished training run"""
        attributes = {"model": label.split(':')[0]}
        self.training_runs_counter.add(1, attributes)
        self.training_epochs_counter.add(epochs, attributes)
        self.training_duration.record(seconds * 1000, attributes)
        if math.isfinite(final_risk):
            self.training_final_risk.record(final_risk, attributes)

    def record_divergence(self, label: str, epoch: int):
        self.training_diverged_counter.add(1, {"model": label.split(':')[0]})
        self.record_error('training_diverged', label)

    def record_command(self, command: str, outcome: str, duration_ms: float):
        self.cli_commands_counter.add(1, {"command": command, "outcome": outcome})
        self.command_duration.record(duration_ms, {"command": command, "outcome": outcome})

    def record_error(self, error_type: str, where: str):
        self.errors_counter.add(1, {"error_type": error_type, "where": where})

    def record_jitter(self, relative_jitter: float):
        self.cholesky_jitter.record(relative_jitter)

    @contextmanager
    def measure_command(self, command: str):
        """Context manager recording a command's duration and outcome"""
        start = time.time()
        outcome = 'success'
        try:
            yield
        except Exception as e:
            outcome = 'failure'
            self.record_error(type(e).__name__, command)
            raise
        finally:
            self.record_command(command, outcome, (time.time() - start) * 1000)


# Global telemetry instance
_telemetry: Optional[TelemetryManager] = None


def init_telemetry() -> TelemetryManager:
    """Initialize telemetry (call once at application startup)"""
    global _telemetry
    if _telemetry is None:
        _telemetry = TelemetryManager()
    return _telemetry


def get_telemetry() -> TelemetryManager:
    """Get the global telemetry instance"""
    if _telemetry is None:
        return init_telemetry()
    return _telemetry
