from setuptools import setup, find_packages

setup(
    name="wearnet",
    version="0.1.0",
    description="Person/clothing worn-relationship classification with soft attention on a from-scratch autodiff core.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
    ],
    python_requires=">=3.11",
    install_requires=[
        "pydantic>=2.0,<3.0",
        "docstring-parser",
        "numpy>=1.24",
        "opencv-python-headless>=4.8,<5",
        "scikit-learn>=1.3",
        "pandas>=2.0",
    ],
    extras_require={
        "test": ["pytest>=7", "scipy>=1.10"],
    },
    entry_points={
        "console_scripts": ["wearnet=wearnet.cli:main"],
    },
    include_package_data=True,
)
