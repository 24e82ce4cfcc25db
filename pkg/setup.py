"""Setup script for zf_uplink_analysis package."""

from setuptools import setup, find_packages

setup(
    name="zf_uplink_analysis",
    version="0.1.0",
    description="Zero-forcing uplink analysis with imperfect CSI in multicell massive MIMO",
    packages=find_packages(include=["src*", "experiments*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0,<2.0.0",
        "pandas>=2.0.0",
        "scipy>=1.11.0",
        "tqdm>=4.65.0",
        "pyyaml>=6.0",
        "mpmath>=1.3.0",
        "matplotlib>=3.7.0",
        "seaborn>=0.12.0",
    ],
    extras_require={
        "dev": ["pytest>=7.3.0", "pytest-cov>=4.0.0", "black>=23.0.0", "mypy>=1.0.0"],
    },
    entry_points={"console_scripts": ["zf-uplink=experiments.cli:main"]},
)
