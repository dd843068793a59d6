import sys
from setuptools import setup, find_packages

NAME = "agediffusion"
VERSION = "1.0.0"

# To install the library, run the following
#
# python setup.py install
#
# prerequisite: setuptools
# http://pypi.python.org/pypi/setuptools

REQUIRES = [
    "numpy>=1.22",
    "numba>=0.57.0",
    "scipy>=1.8",
    "python_dateutil>=2.6.0"
]

setup(
    name=NAME,
    version=VERSION,
    description="Reaction-diffusion age group inference on communication graphs",
    author_email="",
    url="",
    keywords=["label propagation", "homophily", "communication graph", "demographics"],
    install_requires=REQUIRES,
    python_requires=">=3.8",
    packages=find_packages(exclude=["test", "test.*"]),
    include_package_data=True,
    entry_points={
        'console_scripts': ['agediffusion=agediffusion.__main__:main']},
    long_description="""\
    Infers age groups for the nodes of a sparse communication graph by
    propagating probability vectors from a labeled seed set, and analyses
    age homophily and per-node accuracy by topological metrics.
    """
)
