"""Loewner chains, zipper extraction and first variations of Loewner energy."""

__version__ = "0.1.0"

from . import (beltrami, catalog, conformal_maps, energy, errors, loewner_chain,  # noqa: E402
               numerics, variation, zipper)

__all__ = ["__version__", "beltrami", "catalog", "conformal_maps", "energy", "errors",
           "loewner_chain", "numerics", "variation", "zipper"]
