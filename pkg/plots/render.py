#!/usr/bin/env python3
"""Thin launcher so `render.py --csv ... --metric ... --out ...` works
straight from the repository, matching the documented invocation."""

import sys

from ddplots.render import main

if __name__ == "__main__":
    sys.exit(main())
