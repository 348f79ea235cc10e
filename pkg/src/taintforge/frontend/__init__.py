"""PHP-subset frontend: lexer, parser, AST, and project symbol tables."""
from .astnodes import AstNode, Kind, Span, dump_sexpr
from .lexer import LexError, Token, tokenize
from .parser import PhpParseError, parse_php
from .project import (
    ClassInfo,
    DocInfo,
    DuplicateClassError,
    FunctionInfo,
    Param,
    ParseFailure,
    Project,
    PropInfo,
    SourceFile,
    SUPERGLOBALS,
    load_project,
    normalize_type,
    parse_doc,
)

__all__ = [
    "AstNode", "Kind", "Span", "dump_sexpr",
    "LexError", "Token", "tokenize",
    "PhpParseError", "parse_php",
    "ClassInfo", "DocInfo", "DuplicateClassError", "FunctionInfo", "Param",
    "ParseFailure", "Project", "PropInfo", "SourceFile", "SUPERGLOBALS",
    "load_project", "normalize_type", "parse_doc",
]
