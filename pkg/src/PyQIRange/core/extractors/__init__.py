"""
Extractors Submodule

Coincidence histograms, ranging peaks, CHSH estimation and the analysis protocol.
"""
