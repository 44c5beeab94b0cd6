"""File plumbing shared by every stage: compressed input streams, gzip CSV
dataset files with SHA-256 sidecars, and crash markers for partial output.

All dataset files are UTF-8 CSV (RFC 4180 quoting, LF line endings), gzipped
when the path ends in ``.gz``. Gzip members are written with ``mtime=0`` and
no embedded filename so that reruns produce byte-identical files.
"""

from __future__ import annotations

import bz2
import csv
import gzip
import hashlib
import io
import subprocess
import sys
from pathlib import Path
from typing import IO, Iterator, Sequence

from .errors import ConfigurationError, DataFormatError, DumpFormatError

CODECS = ("plain", "gzip", "bzip2", "7z-external")
DEFAULT_SEVENZIP = ("7z", "e", "-so")

PARTIAL_SUFFIX = ".partial"
CHECKSUM_SUFFIX = ".sha256"


def codec_for_path(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".gz":
        return "gzip"
    if suffix in (".bz2", ".bzip2"):
        return "bzip2"
    if suffix == ".7z":
        return "7z-external"
    return "plain"


class _SubprocessStream:
    """Readable binary stream backed by an external decompressor process."""

    def __init__(self, command: Sequence[str], path: str | Path):
        self._command = list(command) + [str(path)]
        try:
            self._proc = subprocess.Popen(
                self._command, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL
            )
        except OSError as err:
            raise ConfigurationError(
                f"cannot run external decompressor {self._command[0]!r}: {err}"
            ) from err

    def read(self, size: int = -1) -> bytes:
        data = self._proc.stdout.read(size)
        if not data:
            code = self._proc.wait()
            if code != 0:
                raise DumpFormatError(
                    f"external decompressor {' '.join(self._command)!r} exited with {code}"
                )
        return data

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
        self._proc.wait()
        self._proc.stdout.close()

    def __enter__(self) -> "_SubprocessStream":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_dump_stream(
    path: str | Path,
    codec: str | None = None,
    sevenzip_command: Sequence[str] | None = None,
) -> IO[bytes]:
    """Open a dump file as a decompressed binary stream.

    ``codec`` is one of ``plain``, ``gzip``, ``bzip2``, ``7z-external``;
    ``None`` selects by file extension. 7z content is piped through an
    external command (default ``7z e -so``) because no codec for it ships
    with the standard library.
    """
    if codec is None:
        codec = codec_for_path(path)
    if codec == "plain":
        return open(path, "rb")
    if codec == "gzip":
        return gzip.open(path, "rb")
    if codec == "bzip2":
        return bz2.open(path, "rb")
    if codec == "7z-external":
        return _SubprocessStream(sevenzip_command or DEFAULT_SEVENZIP, path)
    raise ConfigurationError(f"unknown codec {codec!r}; expected one of {CODECS}")


def sha256_of(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def checksum_path(path: str | Path) -> Path:
    return Path(str(path) + CHECKSUM_SUFFIX)


def write_checksum(path: str | Path, digest: str | None = None) -> Path:
    """Write a sha256sum-compatible sidecar ("<hex>  <filename>")."""
    if digest is None:
        digest = sha256_of(path)
    sidecar = checksum_path(path)
    sidecar.write_text(f"{digest}  {Path(path).name}\n", encoding="utf-8")
    return sidecar


def verify_checksum(path: str | Path) -> bool:
    sidecar = checksum_path(path)
    recorded = sidecar.read_text(encoding="utf-8").split()
    if not recorded:
        return False  # truncated sidecar counts as a failure, not a crash
    return recorded[0] == sha256_of(path)


class _HashingWriter(io.RawIOBase):
    """Binary sink that forwards to a file while updating a digest."""

    def __init__(self, raw: IO[bytes], digest):
        self._raw = raw
        self._digest = digest

    def writable(self) -> bool:
        return True

    def write(self, data) -> int:
        self._digest.update(data)
        return self._raw.write(data)


class DatasetWriter:
    """CSV writer for one dataset file.

    Creates a ``<path>.partial`` marker at open and removes it only after a
    clean close, so interrupted runs are detectable. On close a ``.sha256``
    sidecar is written from the bytes that actually hit the disk. Passing
    ``"-"`` as the path writes plain CSV to standard output instead.
    """

    def __init__(self, path: str | Path, header: Sequence[str], *, sidecar: bool = True):
        self.rows_written = 0
        self._header = list(header)
        self._sidecar = sidecar
        self._stdout = str(path) == "-"
        if self._stdout:
            self._csv = csv.writer(sys.stdout, lineterminator="\n")
            self._csv.writerow(self._header)
            return
        self.path = Path(path)
        self._marker = Path(str(path) + PARTIAL_SUFFIX)
        if sidecar:
            self._marker.touch()
        self._digest = hashlib.sha256()
        self._raw = open(self.path, "wb")
        sink = _HashingWriter(self._raw, self._digest)
        self._zip = None
        if self.path.suffix == ".gz":
            self._zip = gzip.GzipFile(filename="", mode="wb", fileobj=sink, mtime=0)
            stream = self._zip
        else:
            stream = sink
        self._text = io.TextIOWrapper(stream, encoding="utf-8", newline="")
        self._csv = csv.writer(self._text, lineterminator="\n")
        self._csv.writerow(self._header)

    def write_row(self, row: Sequence) -> None:
        self._csv.writerow(row)
        self.rows_written += 1

    def write_rows(self, rows) -> None:
        for row in rows:
            self.write_row(row)

    def close(self) -> None:
        if self._stdout:
            sys.stdout.flush()
            return
        # Detach before closing the gzip member: closing the wrapper would
        # close the member before the trailer had a chance to be written.
        self._text.flush()
        self._text.detach()
        if self._zip is not None:
            self._zip.close()
        self._raw.close()
        if self._sidecar:
            write_checksum(self.path, self._digest.hexdigest())
            self._marker.unlink(missing_ok=True)

    def abort(self) -> None:
        """Close file handles but keep the .partial marker; no checksum."""
        if self._stdout:
            return
        try:
            self._text.flush()
            self._text.detach()
            if self._zip is not None:
                self._zip.close()
        finally:
            self._raw.close()

    def __enter__(self) -> "DatasetWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self.abort()


def iter_rows(
    path: str | Path, expected_header: Sequence[str] | None = None
) -> Iterator[list[str]]:
    """Yield data rows of a dataset file, validating the header if given."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if expected_header is not None and header != list(expected_header):
            raise DataFormatError(
                f"{path}: expected header {list(expected_header)}, found {header}"
            )
        yield from reader
