"""
Runners Submodule

Contains the seeded event engine and the distance sweep runner.
"""