#!/usr/bin/env python

# Editable dev installs only (pip install -e .), packaging metadata lives in pyproject.toml

import setuptools

if __name__ == "__main__":
    setuptools.setup(
        name="cantor-rgg",
        version="1.0.0",
        packages=["cantor_rgg"],
        install_requires=["click", "pydantic>=2", "numpy", "scipy"],
        entry_points={"console_scripts": ["cantor-rgg = cantor_rgg.cli:main"]},
    )
