"""Rule-based labelling of urban mobile-laser-scanning point clouds.

Points are labelled by fusing them with elevation grids and a
topographical map, then labels are propagated through voxel clusters.
"""

from .config import PipelineConfig
from .core import LabelCode, LabeledCloud
from .pipeline import ClassReport, evaluate, run_tile, stats

__all__ = ["LabelCode", "LabeledCloud", "PipelineConfig", "ClassReport", "evaluate", "run_tile", "stats"]
__version__ = "0.1.0"
