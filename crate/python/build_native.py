#!/usr/bin/env python3
"""Builds the native extension with cargo and copies it into the package.

Usage: python python/build_native.py [--debug]

Afterwards `python/sgm/` holds the compiled module and the package can be
imported from the source tree or installed editable with
`pip install -e . --no-build-isolation`.
"""

import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main():
    debug = "--debug" in sys.argv[1:]
    command = ["cargo", "build", "-p", "sgm-python"]
    if not debug:
        command.append("--release")
    subprocess.run(command, cwd=ROOT, check=True)

    if sys.platform.startswith("win"):
        built, installed = "_sgm.dll", "_sgm.pyd"
    elif sys.platform == "darwin":
        built, installed = "lib_sgm.dylib", "_sgm.so"
    else:
        built, installed = "lib_sgm.so", "_sgm.so"
    source = ROOT / "target" / ("debug" if debug else "release") / built
    destination = ROOT / "python" / "sgm" / installed
    shutil.copy2(source, destination)
    print(f"installed {destination}")


if __name__ == "__main__":
    main()
