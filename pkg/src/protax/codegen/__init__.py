"""ProVerif and Tamarin model generation."""

from .common import EXTENSIONS, PROVERIF, TAMARIN, EmittedModel, Provenance, UnsupportedForDialect
from .proverif import emit_proverif
from .tamarin import emit_tamarin
from .wellformed import wellformed

__all__ = [
    "EXTENSIONS", "PROVERIF", "TAMARIN", "EmittedModel", "Provenance", "UnsupportedForDialect",
    "emit_proverif", "emit_tamarin", "wellformed",
]
