"""
Configuration Submodule

Provides classes and functions to load and validate the YAML experiment configuration.
"""
