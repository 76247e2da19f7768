from setuptools import setup, find_packages

with open("requirements.txt") as f:
    requirements = [line for line in f.read().splitlines() if line and not line.startswith("#")]

setup(
    name="gevreykit",
    version="0.1.0",
    author="grigsbyanthony",
    description="Formal Gevrey index analysis for nonlinear totally characteristic PDEs",
    long_description="A CLI tool computing Newton polygons, Gevrey indices and exact formal solutions "
                     "of nonlinear totally characteristic equations in (t, x)",
    packages=find_packages(exclude=("tests",)),
    install_requires=requirements,
    extras_require={
        "test": ["pytest>=7.0", "hypothesis>=6.80"],
    },
    entry_points={
        "console_scripts": [
            "gevreykit=gevreykit.main_cli:cli",
        ],
    },
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
