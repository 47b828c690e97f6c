"""
Synthetic paired datasets: scores, synthesis and task datasets.
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.datagen.datasets import (
    DatasetConfig,
    DatasetDescription,
    JointLayout,
    Manifest,
    Mixture,
    Pair,
    PairedDataset,
    SubTask,
    Task,
    compose_joint_input,
    dataset_scores,
    joint_subtask,
    load_dataset,
    make_task_dataset,
    mix_sources,
    read_manifest,
    save_dataset,
    split_dataset,
    zero_above,
)
from spectrans.datagen.scores import (
    NoteEvent,
    format_score,
    hz_to_midi,
    midi_to_hz,
    parse_score,
    random_score,
)
from spectrans.datagen.synth import (
    TimbreConfig,
    random_timbre,
    render_blueprint,
    render_instrument,
)
