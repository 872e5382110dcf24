"""
Core Module for PyQIRange

Contains all the core functionality including configuration, quantum state models,
the probe-channel link budget, the event engine, tag analysis, exporters, workflow
orchestration, and utilities.
"""
