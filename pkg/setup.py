"""Setup script for the biostab package."""

from setuptools import setup, find_packages

setup(
    name="biostab",
    version="0.1.0",
    packages=find_packages(exclude=("tests", "tests.*")),
    include_package_data=True,
    install_requires=[
        line.strip() for line in open("requirements.txt")
        if line.strip() and not line.startswith("#") and not line.startswith("pytest")
    ],
    entry_points={
        "console_scripts": ["biostab=biostab.cli:main"],
    },
    python_requires=">=3.9",
    description="Linear stability analysis of phototactic bioconvection with anisotropic scattering",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
