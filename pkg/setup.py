import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setuptools.setup(
    name="hamlag",
    version="0.1.0",
    author="refraction-ray",
    author_email="znfesnpbh@gmail.com",
    description="Lagrange multiplier energy-preserving integrators for Hamiltonian PDEs",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests"]),
    include_package_data=True,
    install_requires=[
        "numpy",
        "scipy>=1.4",  # scipy.fft with workers
        "pandas>=1.5",  # to_csv lineterminator keyword
    ],
    tests_require=["pytest"],
    entry_points={"console_scripts": ["hamlag=hamlag.cli:main"]},
    classifiers=(
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ),
)
