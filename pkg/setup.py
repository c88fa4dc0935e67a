from setuptools import setup, find_packages

setup(
    name="momclust",
    version="0.1.0",
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.8',
        'matplotlib>=3.5',
    ],
    entry_points={
        'console_scripts': [
            'momclust=momclust.cli:main',
        ],
    },
    description="Affine subspace clustering by symmetry-free moment relaxations",
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.8',
)
