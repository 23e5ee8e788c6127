"""Structure-aware adaptive music playback for exercise."""

from ._cadence import (
    CadenceError,
    analyze,
    beat_loudness,
    ks_uniform,
    label_intensity,
    lufs,
    paired_t_test,
    plan,
    render,
)

__all__ = [
    "CadenceError",
    "analyze",
    "beat_loudness",
    "ks_uniform",
    "label_intensity",
    "lufs",
    "paired_t_test",
    "plan",
    "render",
]
