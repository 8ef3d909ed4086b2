from setuptools import setup, find_packages
setup(
    name="SGControl",
    version="0.1",
    description="Spectral simulation and low-mode control synthesis for second grade fluids on the 2D torus",
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    author="mosen",
    license="MIT",
    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Physics'
    ],
    keywords='second grade fluid spectral galerkin controllability',
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.8',
        'Flask>=2.0'
    ],
    python_requires='>=3.8',
    tests_require=[
        'pytest',
        'mock'
    ],
    extras_require={
        'ReST': [
            'Sphinx',
            'sphinxcontrib-napoleon'
        ]
    },
    setup_requires=['pytest-runner'],
    entry_points={
        'console_scripts': [
            'sgcontrol=sgcontrol.cli:main',
        ]
    },
    zip_safe=False
)
