"""File formats, ground-truth construction, synthetic data, evaluation and CLI."""
from .evaluate import EvalConfig, MetricReport, SceneMetrics, evaluate, evaluate_scene
from .groundtruth import RawBox, build_ground_truth
from .records import SceneRecord, check_scene, load_scenes, save_scenes
from .render import render_svg
from .synth import SynthConfig, synth_dataset, synth_scene

__all__ = [
    "EvalConfig",
    "MetricReport",
    "RawBox",
    "SceneMetrics",
    "SceneRecord",
    "SynthConfig",
    "build_ground_truth",
    "check_scene",
    "evaluate",
    "evaluate_scene",
    "load_scenes",
    "render_svg",
    "save_scenes",
    "synth_dataset",
    "synth_scene",
]
