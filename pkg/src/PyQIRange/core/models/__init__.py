"""
Models Submodule

Shared data containers passed between the event engine, parsers, exporters and extractors.
"""
