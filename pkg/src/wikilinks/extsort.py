"""Disk-backed sorting for CSV row streams too large for memory.

Rows are spilled to temporary CSV chunk files of bounded size and k-way
merged with :func:`heapq.merge`. Both the chunk sort and the merge are
stable (ties keep the order of arrival), which the pipeline relies on to
preserve the within-revision document order of links without carrying an
explicit position column.
"""

from __future__ import annotations

import csv
import heapq
import tempfile
from typing import Callable, Iterable, Iterator, Sequence

Row = Sequence[str]


def _spill(rows: list[Row], tmpdir: str | None):
    f = tempfile.TemporaryFile("w+", encoding="utf-8", newline="", dir=tmpdir)
    writer = csv.writer(f, lineterminator="\n")
    writer.writerows(rows)
    f.seek(0)
    return f


def external_sort(
    rows: Iterable[Row],
    key: Callable[[Row], object],
    *,
    chunk_rows: int = 200_000,
    tmpdir: str | None = None,
) -> Iterator[list[str]]:
    """Yield ``rows`` sorted by ``key`` using bounded memory."""
    chunks = []
    buffer: list[Row] = []
    try:
        for row in rows:
            buffer.append(row)
            if len(buffer) >= chunk_rows:
                buffer.sort(key=key)
                chunks.append(_spill(buffer, tmpdir))
                buffer = []
        buffer.sort(key=key)
        if not chunks:
            yield from buffer
            return
        if buffer:
            chunks.append(_spill(buffer, tmpdir))
        # heapq.merge breaks key ties toward the earlier iterable, and chunks
        # are passed in spill order, so the overall sort stays stable.
        yield from heapq.merge(*(csv.reader(f) for f in chunks), key=key)
    finally:
        for f in chunks:
            f.close()


def unique_justseen(
    rows: Iterable[Row], key: Callable[[Row], object]
) -> Iterator[Row]:
    """Drop consecutive rows with equal keys (sort-unique second half)."""
    last = object()
    for row in rows:
        k = key(row)
        if k != last:
            last = k
            yield row
