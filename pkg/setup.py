from setuptools import setup, find_packages

setup(
    name='tailcore',
    version='0.1.0',
    description='tailcore computes the asymptotic structure of unital positive maps on finite-dimensional *-algebras.',
    long_description="""

    For a unital positive map phi on a direct sum of matrix algebras, tailcore
computes the idempotent limit E of the powers of phi, the tail system
M_inf = range(E) with the reversible dynamics of phi on it, the definite set,
the multiplicative core C_phi, invariant states and the Jordan structure that
decides whether M_inf and C_phi coincide.

The library includes:

    - Maps given as stochastic matrices, Kraus families, Kraus families followed by the transpose, convex mixes, or asserted matrices
    - The peripheral idempotent E, the spectrum and the period of phi on M_inf
    - Definite set, B_phi and multiplicative core as exact subspace computations
    - Invariant states of maximal support and trace norm decay of functionals
    - Property checks on seeded random instances
    - A command line interface: tailcore analyze / paper-example / verify

""",
    license='MIT',
    packages=find_packages(exclude=['tests']),
    package_dir={'tailcore': 'tailcore'},
    package_data={
        'tailcore': ['datasets/*.json'],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Intended Audience :: Education",
        "Topic :: Scientific/Engineering :: Mathematics"],
    install_requires=['numpy', 'pandas', 'scipy'],
    entry_points={
        'console_scripts': ['tailcore=tailcore.cli:main'],
    },
    keywords=['positive maps', 'operator algebras', 'quantum channels', 'markov chains',
              'jordan algebras'],
)
