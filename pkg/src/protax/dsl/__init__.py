from .lexer import Token, tokenize
from .parser import parse, parse_file
from .pretty import pretty

__all__ = ["Token", "tokenize", "parse", "parse_file", "pretty"]
