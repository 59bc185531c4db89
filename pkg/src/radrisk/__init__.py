"""Risk stratification from radiology report text."""
__version__ = "0.1.0"
