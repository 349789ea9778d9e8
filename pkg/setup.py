"""Setup configuration for sympb."""

from setuptools import setup, find_packages

setup(
    name="sympb",
    version="0.1.0",
    description="Symplectic billiards, area spectra and linear isospectral operators near ellipses",
    author="Isaiah Myles",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.10",
    install_requires=[
        "click>=8.1.0",
        "rich>=13.0.0",
        "pyyaml>=6.0",
        "pydantic>=2.0",
        "numpy>=1.24",
        "scipy>=1.10",
        "sympy>=1.12",
        "mpmath>=1.3",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4",
        ],
    },
    entry_points={
        "console_scripts": [
            "sympb=src.main:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
