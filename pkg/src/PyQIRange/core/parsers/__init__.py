"""
Parsers Submodule

Contains modules to parse QTT1/CSV time-tag files and the exported CSV tables.
"""
