"""Observational-study toolkit: personal-post filtering, stance detection,
cohort construction and propensity-based effect estimation."""

__version__ = "0.1.0"
