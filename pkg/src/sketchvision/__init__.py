"""sketchvision: bidirectional sketch <-> photo <-> implicit 3D pipeline."""

__version__ = "0.1.0"
