"""
Builders Submodule

Lays out run directories (manifest, tag files, tables) and loads them back.
"""
