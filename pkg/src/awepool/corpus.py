"""Feature archives, word alignments, and per-word frame slicing.

A feature archive maps utterance ids to T x D float32 matrices of frame-level
speech representations at a fixed frame rate. Alignments are TSV files with
one word token per row. Together they define the word segments that get
embedded and evaluated downstream.

Archive container (binary, little-endian)::

    magic          4 bytes  b"AWEF"
    version        u32      1
    frame_rate_hz  f64
    dim            u32
    entry_count    u32
    per entry:
        id_length  u32
        id         UTF-8 bytes
        frames T   u32
        data       T * dim  f32, row-major

An optional sidecar manifest ``<path>.manifest.jsonl`` (one JSON object per
line: id, frames, duration_s) can be written next to the archive for quick
inspection without parsing the binary.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentParseError,
    ArchiveFormatError,
    ConsistencyError,
    DataError,
    UnknownUtteranceError,
    ValidationError,
)

ARCHIVE_MAGIC = b"AWEF"
ARCHIVE_VERSION = 1

_HEADER = struct.Struct("<4sIdII")
_U32 = struct.Struct("<I")


class FeatureArchive:
    """Immutable mapping from utterance id to a T x D float32 frame matrix.

    Parameters
    ----------
    entries : mapping of str to array-like
        Frame matrices, one per utterance. Cast to float32 and frozen.
    frame_rate_hz : float
        Frames per second of the representation (50 for a 20 ms stride).
    dim : int, optional
        Representation dimensionality. Inferred from the first entry when
        omitted; required for an empty archive.

    Entries are stored in lexicographic id order and their arrays are marked
    read-only, so a loaded archive is safe to share across parallel workers.
    """

    def __init__(self, entries, frame_rate_hz: float = 50.0, dim: int | None = None):
        if not (math.isfinite(frame_rate_hz) and frame_rate_hz > 0):
            raise ValueError(f"frame_rate_hz must be positive and finite, got {frame_rate_hz}")
        ordered: dict[str, np.ndarray] = {}
        ref_id = None
        for uid in sorted(entries):
            if not uid:
                raise ValueError("utterance ids must be non-empty strings")
            mat = np.ascontiguousarray(entries[uid], dtype=np.float32)
            if mat.ndim != 2:
                raise DataError(f"entry '{uid}': expected a 2-D frame matrix, got ndim={mat.ndim}")
            if mat.shape[0] < 1:
                raise DataError(f"entry '{uid}': matrix has no frames")
            if dim is None:
                dim = mat.shape[1]
                ref_id = uid
            elif mat.shape[1] != dim:
                if ref_id is not None:
                    raise ConsistencyError(
                        f"entry '{uid}' has {mat.shape[1]} columns but entry "
                        f"'{ref_id}' established dim={dim}"
                    )
                raise ConsistencyError(
                    f"entry '{uid}' has {mat.shape[1]} columns, expected dim={dim}"
                )
            if not np.all(np.isfinite(mat)):
                bad = np.argwhere(~np.isfinite(mat))[0]
                raise DataError(
                    f"entry '{uid}': non-finite value at frame {int(bad[0])}, dim {int(bad[1])}"
                )
            mat.flags.writeable = False
            ordered[uid] = mat
        if dim is None:
            raise ValueError("dim is required for an archive with no entries")
        if dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim}")
        self.entries = ordered
        self.frame_rate_hz = float(frame_rate_hz)
        self.dim = int(dim)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, uid):
        return uid in self.entries

    def __getitem__(self, uid):
        try:
            return self.entries[uid]
        except KeyError:
            raise UnknownUtteranceError(f"unknown utterance id '{uid}'") from None

    def __eq__(self, other):
        if not isinstance(other, FeatureArchive):
            return NotImplemented
        return (
            self.frame_rate_hz == other.frame_rate_hz
            and self.dim == other.dim
            and list(self.entries) == list(other.entries)
            and all(np.array_equal(self.entries[k], other.entries[k]) for k in self.entries)
        )


@dataclass(frozen=True)
class WordSegment:
    """One spoken word token: utterance id, case-folded label, times in seconds."""

    utterance_id: str
    word: str
    start_s: float
    end_s: float

    def __post_init__(self):
        word = self.word.strip().casefold()
        object.__setattr__(self, "word", word)
        if not word:
            raise ValidationError("word label is empty after trimming and case-folding")
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValidationError(f"non-finite times {self.start_s}..{self.end_s}")
        if self.start_s < 0:
            raise ValidationError(f"negative start time {self.start_s}")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"end time {self.end_s} must be greater than start time {self.start_s}"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class AlignmentTable:
    """Word segments in file order, with grouped access per utterance.

    Utterance ids are resolved against a FeatureArchive only at slice time;
    parsing never consults the archive.
    """

    segments: list[WordSegment] = field(default_factory=list)

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def by_utterance(self) -> dict[str, list[WordSegment]]:
        """Group segments by utterance id, in order of first appearance."""
        groups: dict[str, list[WordSegment]] = {}
        for seg in self.segments:
            groups.setdefault(seg.utterance_id, []).append(seg)
        return groups


def read_feature_archive(path) -> FeatureArchive:
    """Read a feature archive file.

    Entry order in the returned archive is lexicographic by utterance id,
    independent of on-disk order. Raises ArchiveFormatError (with byte
    offset) on malformed containers and DataError on non-finite values.
    """
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ArchiveFormatError("truncated header", offset=len(head))
        magic, version, frame_rate_hz, dim, count = _HEADER.unpack(head)
        if magic != ARCHIVE_MAGIC:
            raise ArchiveFormatError(f"bad magic {magic!r}, expected {ARCHIVE_MAGIC!r}", offset=0)
        if version != ARCHIVE_VERSION:
            raise ArchiveFormatError(f"unsupported version {version}", offset=4)
        if not (math.isfinite(frame_rate_hz) and frame_rate_hz > 0):
            raise ArchiveFormatError(f"invalid frame_rate_hz {frame_rate_hz}", offset=8)
        if dim < 1:
            raise ArchiveFormatError(f"invalid dim {dim}", offset=16)
        entries: dict[str, np.ndarray] = {}
        pos = _HEADER.size
        for i in range(count):
            raw = f.read(_U32.size)
            if len(raw) < _U32.size:
                raise ArchiveFormatError(f"truncated id length for entry {i}", offset=pos)
            (id_len,) = _U32.unpack(raw)
            pos += _U32.size
            id_bytes = f.read(id_len)
            if len(id_bytes) < id_len:
                raise ArchiveFormatError(f"truncated id for entry {i}", offset=pos)
            try:
                uid = id_bytes.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ArchiveFormatError(f"entry {i}: id is not valid UTF-8 ({e})", offset=pos)
            pos += id_len
            raw = f.read(_U32.size)
            if len(raw) < _U32.size:
                raise ArchiveFormatError(f"truncated frame count for '{uid}'", offset=pos)
            (frames,) = _U32.unpack(raw)
            pos += _U32.size
            if frames < 1:
                raise ArchiveFormatError(f"entry '{uid}' declares {frames} frames", offset=pos)
            nbytes = frames * dim * 4
            buf = f.read(nbytes)
            if len(buf) < nbytes:
                raise ArchiveFormatError(
                    f"truncated frame data for '{uid}' ({len(buf)} of {nbytes} bytes)",
                    offset=pos,
                )
            pos += nbytes
            if uid in entries:
                raise ArchiveFormatError(f"duplicate utterance id '{uid}'", offset=pos)
            entries[uid] = np.frombuffer(buf, dtype="<f4").reshape(frames, dim)
        if f.read(1):
            raise ArchiveFormatError("trailing bytes after last entry", offset=pos)
    return FeatureArchive(entries, frame_rate_hz=frame_rate_hz, dim=dim)


def write_feature_archive(archive: FeatureArchive, path, manifest: bool = False) -> None:
    """Write an archive; the result round-trips bit-exactly through the reader.

    Entries are written in the archive's lexicographic order, so writing the
    same archive twice produces byte-identical files. With ``manifest=True``
    a ``<path>.manifest.jsonl`` sidecar is emitted.
    """
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                ARCHIVE_MAGIC,
                ARCHIVE_VERSION,
                archive.frame_rate_hz,
                archive.dim,
                len(archive.entries),
            )
        )
        for uid, mat in archive.entries.items():
            id_bytes = uid.encode("utf-8")
            f.write(_U32.pack(len(id_bytes)))
            f.write(id_bytes)
            f.write(_U32.pack(mat.shape[0]))
            f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
    if manifest:
        with open(f"{path}.manifest.jsonl", "w", encoding="utf-8") as f:
            for uid, mat in archive.entries.items():
                row = {
                    "id": uid,
                    "frames": int(mat.shape[0]),
                    "duration_s": mat.shape[0] / archive.frame_rate_hz,
                }
                f.write(json.dumps(row) + "\n")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_alignments(path) -> AlignmentTable:
    """Parse a word alignment TSV into an AlignmentTable.

    Format: four columns ``utterance_id\\tword\\tstart_s\\tend_s``. A header
    row is detected by a non-numeric third field and skipped; ``#``-prefixed
    comment lines and blank lines are ignored. Words are case-folded. Rows
    with ``end_s <= start_s`` raise ValidationError with the line number.
    """
    segments: list[WordSegment] = []
    first_data_row = True
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise AlignmentParseError(
                    f"expected 4 tab-separated columns, got {len(fields)}", line=lineno
                )
            uid, word, start_text, end_text = fields
            if first_data_row:
                first_data_row = False
                if not _is_number(start_text):
                    continue  # header row
            if not _is_number(start_text):
                raise AlignmentParseError(f"non-numeric start time '{start_text}'", line=lineno)
            if not _is_number(end_text):
                raise AlignmentParseError(f"non-numeric end time '{end_text}'", line=lineno)
            start_s = float(start_text)
            end_s = float(end_text)
            if not uid:
                raise ValidationError("empty utterance id", line=lineno)
            if not word.strip().casefold():
                raise ValidationError("empty word label", line=lineno)
            if not (math.isfinite(start_s) and math.isfinite(end_s)):
                raise ValidationError(f"non-finite times {start_text}..{end_text}", line=lineno)
            if start_s < 0:
                raise ValidationError(f"negative start time {start_text}", line=lineno)
            if end_s <= start_s:
                raise ValidationError(
                    f"end time {end_text} is not greater than start time {start_text}",
                    line=lineno,
                )
            segments.append(WordSegment(uid, word, start_s, end_s))
    return AlignmentTable(segments)


def write_alignments(table: AlignmentTable, path) -> None:
    """Serialize a table back to TSV; parse(write(parse(x))) is identity."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("utterance_id\tword\tstart_s\tend_s\n")
        for seg in table.segments:
            f.write(f"{seg.utterance_id}\t{seg.word}\t{seg.start_s!r}\t{seg.end_s!r}\n")


def filter_words(
    table: AlignmentTable, min_chars: int = 5, min_duration_s: float = 0.5
) -> list[WordSegment]:
    """Select the evaluated word set: tokens of at least ``min_chars``
    characters and at least ``min_duration_s`` seconds (both inclusive).
    Original order is preserved; an empty result is legal.
    """
    return [
        seg
        for seg in table.segments
        if len(seg.word) >= min_chars and (seg.end_s - seg.start_s) >= min_duration_s
    ]


# Guard (in frames) against decimal-to-binary noise in start/end * rate,
# e.g. 0.3 * 50 != 15 exactly in float64. Far below any alignment precision.
_FRAME_EPS = 1e-9


def slice_frames(archive: FeatureArchive, seg: WordSegment) -> np.ndarray:
    """Return the frame rows [a, b) covering a word segment.

    a = floor(start_s * rate), b = ceil(end_s * rate), clamped to [0, T].
    When clamping or rounding collapses the range, the single nearest valid
    frame is returned, so the result always has at least one row.
    """
    mat = archive[seg.utterance_id]
    frames = mat.shape[0]
    rate = archive.frame_rate_hz
    a = math.floor(seg.start_s * rate + _FRAME_EPS)
    b = math.ceil(seg.end_s * rate - _FRAME_EPS)
    a = min(max(a, 0), frames)
    b = min(max(b, 0), frames)
    if b <= a:
        idx = min(max(a, 0), frames - 1)
        return mat[idx : idx + 1]
    return mat[a:b]
