"""Friendly adversarial data augmentation and geometry-aware adversarial
training for small text classifiers."""

__version__ = "0.1.0"
