"""Data-fusion labelling stages (ground, buildings, cars, pole-like objects)."""

from .building import label_buildings
from .car import CarDims, label_cars
from .ground import label_ground, label_noise_below
from .pole import (GridStats, PoleCandidate, compute_grid_stats, detect_pole,
                   estimate_radius, extract_search_area, label_poles,
                   seed_label_cylinder)

__all__ = [
    "label_ground", "label_noise_below", "label_buildings", "CarDims", "label_cars",
    "GridStats", "PoleCandidate", "extract_search_area", "compute_grid_stats",
    "detect_pole", "estimate_radius", "seed_label_cylinder", "label_poles",
]
