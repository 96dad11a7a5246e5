from setuptools import setup

setup(
    name='pclan',
    version='0.1-alpha',
    packages=['pclan', 'pclan.lattice', 'pclan.processes', 'pclan.metrics', 'pclan.experiments',
              'pclan.configuratron'],
    install_requires=['numpy>=1.17.4', 'scipy>=1.5.0', 'pandas>=1.0.0', 'tqdm>=4.46.0', 'pyyaml>=5.3.1',
                      'pyyaml-include>=1.2,<2', 'parse==1.15.0'],
    entry_points={'console_scripts': ['pclan=pclan.cli:main']},
    license='BSD',
    description='Exact sampling and bound verification for Peierls contour loss networks'
)
