"""Producers write queue files while the schema changes under them.

    python demos/pipeline.py [producers] [records]
"""

import sys
import tempfile

from schemafirst.registry import SchemaStore
from schemafirst.telemetry import pipeline_demo


def main(argv):
    producers = int(argv[0]) if argv else 2
    records = int(argv[1]) if len(argv) > 1 else 100
    with tempfile.TemporaryDirectory(prefix="schemafirst-pipeline-") as tmp:
        report = pipeline_demo(producers, records, SchemaStore(f"{tmp}/store"), workdir=f"{tmp}/queues")
    print(report.format())


if __name__ == "__main__":
    main(sys.argv[1:])
