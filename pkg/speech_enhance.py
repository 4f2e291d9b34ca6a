"""
Speech Enhance - Main Entry Point

Run `python speech_enhance.py --help` for the list of subcommands.
"""

import sys

from src.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
