"""Region decomposition for fine-grained 3D point-cloud segmentation."""

__version__ = "0.1.0"
