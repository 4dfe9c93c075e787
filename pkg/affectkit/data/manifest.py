"""
Dataset Manifest

Tab-separated text, one ``video_id<TAB>path<TAB>split<TAB>fold`` line per
video; fold is ``-`` when unassigned. Relative paths resolve against the
manifest's directory.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd
import structlog

from ..errors import ContractError, DataFormatError
from .afb1 import VideoRecord, read_video_file

logger = structlog.get_logger(__name__)

SPLITS = ("train", "val", "test")
COLUMNS = ["video_id", "path", "split", "fold"]
UNASSIGNED = "-"


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    path: Path
    split: str
    fold: Optional[int] = None


class Manifest:
    """Immutable, ordered set of manifest entries keyed by video id."""

    def __init__(self, entries: Iterable[ManifestEntry]):
        self.entries: List[ManifestEntry] = list(entries)
        self._by_id: Dict[str, ManifestEntry] = {}
        for entry in self.entries:
            if entry.video_id in self._by_id:
                raise ContractError(f"Duplicate video id in manifest: {entry.video_id}")
            if entry.split not in SPLITS:
                raise ContractError(f"Unknown split tag: {entry.split}",
                                    {'video_id': entry.video_id, 'valid': ", ".join(SPLITS)})
            self._by_id[entry.video_id] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entry(self, video_id: str) -> ManifestEntry:
        return self._by_id[video_id]

    def ids(self, split: Optional[str] = None) -> List[str]:
        return [e.video_id for e in self.entries if split is None or e.split == split]

    def by_split(self, split: str) -> List[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def folds(self) -> List[int]:
        """Sorted distinct fold indices among train videos."""
        return sorted({e.fold for e in self.by_split("train") if e.fold is not None})

    def has_folds(self) -> bool:
        train = self.by_split("train")
        return bool(train) and all(e.fold is not None for e in train)

    def with_folds(self, folds: Dict[str, int]) -> "Manifest":
        """Copy with fold indices set for the given videos."""
        return Manifest(replace(e, fold=folds.get(e.video_id, e.fold)) for e in self.entries)


def read_manifest(path: Union[str, Path]) -> Manifest:
    """
    Load a manifest file.

    Raises:
        DataFormatError: If a line has the wrong field count or a bad fold value
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, sep="\t", header=None, dtype=str,
                            keep_default_na=False, quoting=csv.QUOTE_NONE)
    except pd.errors.EmptyDataError:
        return Manifest([])
    except pd.errors.ParserError as e:
        raise DataFormatError(f"Malformed manifest: {e}", path=str(path)) from e
    if frame.shape[1] != len(COLUMNS):
        raise DataFormatError(f"Manifest lines need {len(COLUMNS)} tab-separated fields",
                              path=str(path), found=frame.shape[1])
    frame.columns = COLUMNS

    entries = []
    for line, row in enumerate(frame.itertuples(index=False), start=1):
        fold: Optional[int] = None
        if row.fold != UNASSIGNED:
            try:
                fold = int(row.fold)
            except ValueError as e:
                raise DataFormatError(f"Bad fold value: {row.fold!r}", path=str(path),
                                      line=line) from e
        file_path = Path(row.path)
        if not file_path.is_absolute():
            file_path = path.parent / file_path
        entries.append(ManifestEntry(row.video_id, file_path, row.split, fold))
    return Manifest(entries)


def write_manifest(path: Union[str, Path], manifest: Manifest) -> Path:
    """Write a manifest; paths under its directory are stored relative."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for e in manifest:
        try:
            stored = e.path.relative_to(path.parent)
        except ValueError:
            stored = e.path
        rows.append([e.video_id, stored.as_posix(), e.split,
                     UNASSIGNED if e.fold is None else str(e.fold)])
    pd.DataFrame(rows, columns=COLUMNS).to_csv(path, sep="\t", header=False, index=False)
    return path


def load_records(manifest: Manifest, split: Optional[str] = None,
                 max_workers: int = 4) -> Dict[str, VideoRecord]:
    """
    Read the feature files of a manifest (optionally one split) concurrently.

    Returns:
        Map of video id to record, in manifest order

    Raises:
        DataFormatError: If a referenced file is missing or does not parse,
            or its video id differs from the manifest's
    """
    entries = manifest.by_split(split) if split else list(manifest)
    missing = [str(e.path) for e in entries if not e.path.exists()]
    if missing:
        raise DataFormatError("Manifest references missing feature files",
                              path=missing[0], missing=len(missing))

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        records = list(executor.map(lambda e: read_video_file(e.path), entries))

    loaded: Dict[str, VideoRecord] = {}
    for entry, record in zip(entries, records):
        if record.video_id != entry.video_id:
            raise DataFormatError(
                f"File holds video {record.video_id!r}, manifest says {entry.video_id!r}",
                path=str(entry.path))
        loaded[entry.video_id] = record
    logger.info("Loaded feature files", split=split or "all", videos=len(loaded))
    return loaded
