"""
mfg-solver - Major/minor mean field game solver and verification harness
Main entry point for the command line
"""

import sys
from pathlib import Path

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent))

if __name__ == "__main__":
    from src.cli import main

    sys.exit(main())
