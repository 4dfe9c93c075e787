"""
Synthetic Dataset Generator

Smooth latent trajectories (sums of low-frequency sinusoids) drive valence,
arousal and AU activations. Features are a fixed random linear plus tanh lift
of the latent with Gaussian noise, so the label mapping is learnable from the
features.
"""

from pathlib import Path
from typing import List, Union

import numpy as np
import structlog

from ..errors import ContractError
from .afb1 import N_AUS, VideoRecord, write_video_file
from .manifest import Manifest, ManifestEntry, write_manifest

logger = structlog.get_logger(__name__)

LATENT_DIM = 4
SINUSOIDS = 3
NOISE_STD = 0.1
VAL_FRACTION = 0.2


def _latent(rng: np.random.Generator, n_frames: int) -> np.ndarray:
    t = np.arange(n_frames) / n_frames
    z = np.zeros((n_frames, LATENT_DIM))
    for channel in range(LATENT_DIM):
        amplitude = rng.uniform(0.2, 0.5, size=SINUSOIDS)
        cycles = rng.uniform(0.5, 4.0, size=SINUSOIDS)
        phase = rng.uniform(0.0, 2 * np.pi, size=SINUSOIDS)
        z[:, channel] = (amplitude * np.sin(2 * np.pi * np.outer(t, cycles) + phase)).sum(axis=1)
    return z


def synth_generate(n_videos: int = 40, n_frames: int = 400, feat_dim: int = 64,
                   seed: int = 0, labels: str = "va") -> List[VideoRecord]:
    """
    Generate a deterministic synthetic dataset.

    Args:
        n_videos: Number of videos
        n_frames: Frames per video
        feat_dim: Feature width
        seed: Generator seed; equal seeds give identical records
        labels: "va" for valence/arousal, "au" for 12 AU bits, "none"

    Returns:
        Records named synth_000, synth_001, ...
    """
    if n_videos < 1 or n_frames < 1 or feat_dim < 1:
        raise ContractError("Synthetic dataset extents must be positive",
                            {'videos': n_videos, 'frames': n_frames, 'dim': feat_dim})
    if labels not in ("va", "au", "none"):
        raise ContractError(f"Unknown label kind: {labels}", {'valid': "va, au, none"})

    rng = np.random.default_rng(seed)
    lift_linear = rng.standard_normal((LATENT_DIM, feat_dim)) / np.sqrt(LATENT_DIM)
    lift_nonlinear = rng.standard_normal((LATENT_DIM, feat_dim))
    au_weights = rng.standard_normal((LATENT_DIM, N_AUS)) * 2.0
    au_bias = rng.normal(0.0, 0.3, size=N_AUS)

    records = []
    for index in range(n_videos):
        z = _latent(rng, n_frames)
        features = z @ lift_linear + 0.5 * np.tanh(z @ lift_nonlinear)
        features += rng.normal(0.0, NOISE_STD, size=features.shape)
        if labels == "va":
            valence = np.tanh(0.9 * (z[:, 0] + 0.5 * z[:, 1]))
            arousal = np.tanh(0.9 * (z[:, 2] - 0.5 * z[:, 3]))
            targets = np.clip(np.stack([valence, arousal], axis=1), -1.0, 1.0).astype(np.float32)
        elif labels == "au":
            targets = (z @ au_weights + au_bias > 0).astype(np.uint8)
        else:
            targets = None
        records.append(VideoRecord(f"synth_{index:03d}", features.astype(np.float32), targets))

    logger.info("Generated synthetic dataset", videos=n_videos, frames=n_frames,
                feat_dim=feat_dim, seed=seed, labels=labels)
    return records


def write_dataset(records: List[VideoRecord], out_dir: Union[str, Path],
                  seed: int = 0, val_fraction: float = VAL_FRACTION) -> Manifest:
    """
    Write records as AFB1 files plus ``manifest.tsv``.

    A seeded permutation sends ``val_fraction`` of the videos to the val split.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_val = int(round(len(records) * val_fraction)) if len(records) > 1 else 0
    val_ids = {records[i].video_id for i in rng.permutation(len(records))[:n_val]}

    entries = []
    for record in records:
        path = write_video_file(out_dir / f"{record.video_id}.afb1", record)
        split = "val" if record.video_id in val_ids else "train"
        entries.append(ManifestEntry(record.video_id, path, split))
    manifest = Manifest(entries)
    write_manifest(out_dir / "manifest.tsv", manifest)
    logger.info("Wrote synthetic dataset", out_dir=str(out_dir), videos=len(records),
                val=n_val)
    return manifest
