"""Measure color bias between an original image dataset and its recolorized counterpart."""

__version__ = "0.1.0"

from .color import lab_distance, luma_grayscale, rgb_to_hsv, rgb_to_lab  # noqa: E402

__all__ = ["__version__", "lab_distance", "luma_grayscale", "rgb_to_hsv", "rgb_to_lab"]
