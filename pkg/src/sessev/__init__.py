"""Workbench for asynchronous multiparty sessions and their event
structure semantics: calculus, asynchronous types, the two labelled
transition systems, event structures, and configuration-domain comparison.
"""

__version__ = "0.1.0"
