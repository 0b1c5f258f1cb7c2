"""mfg-solver - Major/minor mean field game solver and verification harness"""
__version__ = "1.0.0"
