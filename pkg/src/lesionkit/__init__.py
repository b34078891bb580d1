"""lesionkit: interactive 3D lesion segmentation with structured reports."""

__version__ = "0.1.0"
