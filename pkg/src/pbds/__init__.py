"""Provenance-based data skipping: capture, safety and reuse of range sketches."""
from .capture import capture
from .evaluate import eval_plan, whole_lineage
from .parser import parse_query
from .partition import RangePartition, Stats, build_equi_depth
from .reuse import Template, check_reusable, instantiate
from .safety import check_safe
from .sketch import BitSketch, SketchSet, accurate_sketch, instance
from .skipping import quse, sketch_to_predicate

__version__ = "0.1.0"

__all__ = [
    "BitSketch", "RangePartition", "SketchSet", "Stats", "Template",
    "accurate_sketch", "build_equi_depth", "capture", "check_reusable", "check_safe",
    "eval_plan", "instance", "instantiate", "parse_query", "quse", "sketch_to_predicate",
    "whole_lineage",
]
