"""
Utilities Submodule

Provides helper functions for file I/O, filename sanitization, argument parsing, and unit handling.
"""
