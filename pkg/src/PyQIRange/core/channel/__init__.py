"""
Channel Submodule

Gaussian-beam geometry and the probe-path link budget.
"""
