from setuptools import setup
from pathlib import Path
this_directory = Path(__file__).parent

setup(
    name = 'VoBAL',
    version = '0.1.0',
    description = 'Quantum and classical Fisher information for axial localisation with Laguerre-Gauss vortex beams: optimal detection planes and shot-noise Monte Carlo checks of the Cramer-Rao bound.',
    license = 'GPL-2.0',
    packages = ['VoBAL'],
    long_description = (this_directory / "README.md").read_text(),
    long_description_content_type = 'text/markdown',
    install_requires = [
        "numpy",
        "scipy",
        "pandas",
        "joblib",
        "tqdm",
        ],
    entry_points = {
        'console_scripts': ['vobal = VoBAL.cli:main'],
    },

    classifiers = [
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v2 (GPLv2)',
        'Operating System :: POSIX :: Linux',
        'Operating System :: MacOS :: MacOS X',
        'Operating System :: Microsoft :: Windows',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Topic :: Scientific/Engineering :: Physics',
        'Topic :: Scientific/Engineering'
    ],
)
