"""Area coverage planning: turn-minimising cell decomposition, service tracks, and capacitated line-coverage routing."""
from .costs import CostModel, RampParams, WindParams, ramp_time
from .decomposition import Cell, decompose
from .errors import AreaCoverageError
from .geometry import Point, PolygonWithHoles, Segment
from .graph import CoverageGraph, build_graph, shortest_deadheads
from .mem import Solution, brute_force_oracle, count_turns, mem_solve
from .pipeline import PlanConfig, PlanReport, plan
from .tracks import ServiceTrack, coverage_fraction, generate_all_tracks

__version__ = "0.1.0"
