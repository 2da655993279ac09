#!/usr/bin/env python3
"""
Launcher for the civ command line from a source checkout
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from civ.cli import dispatch  # noqa: E402

if __name__ == "__main__":
    sys.exit(dispatch())
