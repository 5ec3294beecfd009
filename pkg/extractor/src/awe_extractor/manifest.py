"""Extraction manifest: which utterances to encode, from which audio files."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ManifestRow:
    utterance_id: str
    audio_path: str
    start_s: float | None = None
    end_s: float | None = None


@dataclass
class ExtractionManifest:
    rows: list[ManifestRow]
    model_id: str = ""
    layer_indices: list[int] = field(default_factory=list)
    target_frame_rate_hz: float | None = None

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.utterance_id in seen:
                raise ValueError(f"duplicate utterance id '{row.utterance_id}'")
            seen.add(row.utterance_id)
        if len(set(self.layer_indices)) != len(self.layer_indices):
            raise ValueError(f"duplicate layer indices in {self.layer_indices}")


def parse_manifest_rows(path) -> list[ManifestRow]:
    """Parse a TSV manifest: utterance_id, audio_path, optional start_s/end_s.

    Blank lines and '#' comments are skipped; utterance ids must be unique.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) == 2:
                rows.append(ManifestRow(fields[0], fields[1]))
            elif len(fields) == 4:
                try:
                    start_s, end_s = float(fields[2]), float(fields[3])
                except ValueError as e:
                    raise ValueError(f"line {lineno}: non-numeric crop times ({e})") from None
                if end_s <= start_s:
                    raise ValueError(f"line {lineno}: end_s must be greater than start_s")
                rows.append(ManifestRow(fields[0], fields[1], start_s, end_s))
            else:
                raise ValueError(
                    f"line {lineno}: expected 2 or 4 tab-separated columns, got {len(fields)}"
                )
    seen = set()
    for row in rows:
        if row.utterance_id in seen:
            raise ValueError(f"duplicate utterance id '{row.utterance_id}'")
        seen.add(row.utterance_id)
    return rows
