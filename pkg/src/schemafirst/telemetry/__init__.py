"""Producer and consumer side: builders, queue files, spans and the demo pipeline."""

from .builder import RecordBuilder
from .pipeline import PipelineReport, consume, pipeline_demo
from .queue import QueueFile, QueueReader, emit
from .span import SpanEnvelope, attach_span_payload, read_span_payload

__all__ = [
    "PipelineReport",
    "QueueFile",
    "QueueReader",
    "RecordBuilder",
    "SpanEnvelope",
    "attach_span_payload",
    "consume",
    "emit",
    "pipeline_demo",
    "read_span_payload",
]
