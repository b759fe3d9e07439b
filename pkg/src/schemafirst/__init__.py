"""Schema-first application telemetry."""
