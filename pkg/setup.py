#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""

from setuptools import setup, find_packages

with open("README.md") as readme_file:
    readme = readme_file.read()

with open("HISTORY.md") as history_file:
    history = history_file.read()

requirements = [
    "numpy>=1.22",
    "scipy>=1.9",
    "pandas>=2.0",
    "statsmodels>=0.13",
    "arch>=5.0",
    "matplotlib>=3.5",
]

setup_requirements = [
    "pytest-runner",
    "twine",
]

test_requirements = [
    "pytest",
    "tox",
    "coverage",
    "pytest-cov",
    "flake8",
    "black",
    "pep8-naming",
]

setup(
    author="quanteasy developers",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Intended Audience :: Financial and Insurance Industry",
        "License :: OSI Approved :: Apache Software License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Office/Business :: Financial :: Investment",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    description="Semiparametric quantile forecasts of returns and realized volatility",
    entry_points={"console_scripts": ["quanteasy=quanteasy.cli:main"]},
    install_requires=requirements,
    license="Apache Software License 2.0",
    long_description=readme + "\n\n" + history,
    long_description_content_type="text/markdown",
    include_package_data=True,
    keywords="quanteasy quantile-regression realized-volatility value-at-risk",
    name="quanteasy",
    packages=find_packages(include=["quanteasy"]),
    python_requires=">=3.9",
    setup_requires=setup_requirements,
    test_suite="tests",
    tests_require=test_requirements,
    version="0.1.0",
    zip_safe=False,
)
