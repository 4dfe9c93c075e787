"""
Data Package

AFB1 feature files, manifests, sequence windows, synthetic data and score
files.
"""

from .afb1 import VideoRecord, decode_record, encode_record, read_video_file, write_video_file
from .manifest import Manifest, ManifestEntry, load_records, read_manifest, write_manifest
from .scores import read_fold_scores, read_scores, write_fold_scores, write_scores
from .synth import synth_generate, write_dataset
from .windows import (
    SequenceBatch,
    SequenceWindow,
    batch_windows,
    stitch_windows,
    window_sequences,
    window_starts,
)

__all__ = [
    "VideoRecord", "decode_record", "encode_record", "read_video_file", "write_video_file",
    "Manifest", "ManifestEntry", "load_records", "read_manifest", "write_manifest",
    "read_fold_scores", "read_scores", "write_fold_scores", "write_scores",
    "synth_generate", "write_dataset", "SequenceBatch", "SequenceWindow",
    "batch_windows", "stitch_windows", "window_sequences", "window_starts",
]
