"""A workbench for a resource-sensitive pi-calculus and its trace semantics."""

__version__ = "0.1.0"
