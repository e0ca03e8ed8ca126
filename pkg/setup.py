# !/usr/bin/env python3

"""gaitswap: gait transfer with temporal attention generators.

This package provides:
- a pose-sequence dataset format and a synthetic walker generator
- key pose selection, a cycle-consistent Transformer generator and training
- gait, appearance and motion metrics, and a real-vs-generated detector
"""

import os
import sys

from setuptools import setup, find_packages

here = os.path.dirname(__file__)
README = open(os.path.join(here, 'README.md')).read()


if sys.version_info.major < 3 or sys.version_info.minor < 8:
    print("Package is for python 3.8 or later, please upgrade")
    sys.exit(1)


setup(name='gaitswap',
      version='0.1.0',
      license='MIT',
      description="gaitswap: gait transfer with temporal attention",
      long_description=README,
      long_description_content_type="text/markdown",
      keywords=['gait', 'motion transfer', 'GAN', 'transformer',
                'attention', 'pose', 'video'],
      platforms=["Linux", "MacOS"],
      python_requires=">=3.8",
      packages=find_packages(exclude=['test']),
      tests_require=["pytest"],
      install_requires=['numpy', 'torch', 'scikit-learn', 'scipy',
                        'scikit-image', 'opencv-python-headless', 'tqdm',
                        'matplotlib'],
      extras_require={'deep': ['torchvision']},
      entry_points={'console_scripts': ['gaitswap=gaitswap.cli:main']},
      classifiers=['Development Status :: 3 - Alpha',
                   'Intended Audience :: Science/Research',
                   'Topic :: Scientific/Engineering :: Image Recognition',
                   'License :: OSI Approved :: MIT License',
                   'Programming Language :: Python :: 3',
                   'Programming Language :: Python :: 3.8',
                   'Programming Language :: Python :: 3.9',
                   'Programming Language :: Python :: 3.10']
      )
