"""Edge-assisted semantic compression: local surrogates of a global classifier."""

__version__ = "0.1.0"
