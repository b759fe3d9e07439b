"""Append-only queue file of length-prefixed payload frames.

A frame is ``uleb128(len(payload)) payload``.  One writer may append while
any number of readers tail the file; a reader only ever returns whole
frames and leaves a partially written one for its next poll.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterator, Union

from ..codec import read_uleb128, uleb128
from ..errors import TruncatedPayload


class QueueFile:
    def __init__(self, path: Union[str, os.PathLike]):
        self.path = Path(path)
        self.path.touch(exist_ok=True)

    def append(self, payload: bytes) -> int:
        """Append one frame and return its byte offset."""
        frame = uleb128(len(payload)) + bytes(payload)
        with open(self.path, "ab") as fh:
            offset = fh.tell()
            fh.write(frame)
            fh.flush()
        return offset

    def reader(self) -> QueueReader:
        return QueueReader(self.path)

    def frames(self) -> list[bytes]:
        return self.reader().poll()

    def __iter__(self) -> Iterator[bytes]:
        return iter(self.frames())

    def __len__(self) -> int:
        return len(self.frames())


class QueueReader:
    """Tails a queue file from a monotonically advancing position."""

    def __init__(self, path: Union[str, os.PathLike], position: int = 0):
        self.path = Path(path)
        self.position = position

    def poll(self) -> list[bytes]:
        with open(self.path, "rb") as fh:
            fh.seek(self.position)
            data = fh.read()
        out = []
        pos = 0
        while pos < len(data):
            try:
                n, start = read_uleb128(data, pos)
            except TruncatedPayload:
                break
            if start + n > len(data):
                break
            out.append(data[start:start + n])
            pos = start + n
        self.position += pos
        return out


def emit(builder, sink: QueueFile) -> bytes:
    """Encode the builder's record and append it to ``sink`` as one frame.

    Encoding happens first, so a failing record leaves the queue untouched.
    """
    payload = builder.encode()
    sink.append(payload)
    return payload
