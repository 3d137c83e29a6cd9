from __future__ import print_function
import os

from setuptools import setup, find_packages

import fnetcheck

CURRENT_DIR = os.path.abspath(os.path.dirname(__file__))

with open(os.path.join(CURRENT_DIR, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()


def get_reqs(*fns):
    lst = []
    for fn in fns:
        with open(os.path.join(CURRENT_DIR, fn), encoding='utf-8') as fin:
            for package in fin.readlines():
                package = package.split('#', 1)[0].strip()
                if package:
                    lst.append(package)
    return lst


setup(
    name="fnetcheck",
    version=fnetcheck.__version__,
    packages=find_packages(),
    package_data={'fnetcheck': ['samples/*.fnet', 'samples/*.stim', 'samples/*.trace']},
    include_package_data=True,
    description="Consistency checking, scenario monitoring and simulation for automotive function nets and their views.",
    long_description=long_description,
    long_description_content_type='text/markdown',
    license="MIT",
    # https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Developers',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Software Development :: Quality Assurance',
    ],
    entry_points={'console_scripts': [
        'fnet = fnetcheck.cli:command_line_runner',
    ]},
    python_requires='>=3.8',
    zip_safe=False,
    install_requires=get_reqs('requirements.txt'),
    tests_require=get_reqs('requirements-test.txt'),
)
