"""Tray-region retail checkout counting pipeline.

Stages: background estimation, tray ROI extraction, detection filtering,
appearance-aided tracking, first-seen count events, and F1 scoring of
submission files against ground-truth presence intervals.
"""

__version__ = "0.1.0"
