#!/usr/bin/env python3
"""
Setup script for hullact - Learnable hull-constrained activations
"""

from setuptools import setup

# Read README file
try:
    with open("README.md", "r", encoding="utf-8") as f:
        long_description = f.read()
except FileNotFoundError:
    long_description = (
        "Neural networks whose activations are learned convex or affine combinations of base functions"
    )

setup(
    name="hullact",
    version="0.1.0",
    description="Neural networks with learnable hull-constrained activation functions",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="hullact developers",
    # Include all Python modules in the current directory
    py_modules=[
        "hullact",
        "cli_parser",
        "input_validator",
        "message_templates",
        "ui_utilities",
        "run_store",
        "autodiff",
        "activations",
        "layers",
        "optim",
        "data",
        "verify",
        "harness",
    ],
    # Create the hullact command
    entry_points={
        "console_scripts": [
            "hullact=hullact:main",
        ],
    },
    # Dependencies
    install_requires=[
        "numpy>=1.22.0",
        "requests>=2.25.0",
        "tqdm>=4.60.0",
    ],
    # Optional dependencies
    extras_require={
        "dev": [
            "pytest>=6.0.0",
            "flake8>=3.8.0",
            "mypy>=1.0.0",
        ],
    },
    # Include additional files
    include_package_data=True,
    package_data={
        "": [
            "configs/*.json",
            "scripts/**/*",
            "*.md",
        ],
    },
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    keywords="neural networks activation functions convex hull affine hull numpy",
)
