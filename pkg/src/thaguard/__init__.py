"""Wavelength-resolved Trojan-horse leakage analysis for QKD optical modules."""

from importlib.resources import files

__version__ = "0.1.0"


def sample_data_dir():
    """Directory holding the bundled sample dataset."""
    return files(__name__) / "data" / "sample"
