"""
procbench - procedural video assessment benchmark toolkit
Dataset synthesis, model inference and metric reporting
"""

__version__ = "1.0.0"
__title__ = "procbench"
__description__ = "Perturbed procedural-video datasets and temporal assessment metrics"
