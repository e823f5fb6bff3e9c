from setuptools import find_packages, setup

setup(
    name='src',
    packages=find_packages(exclude=['tests']),
    version='0.1.0',
    description='Accelerated diffusion-based multi-agent trajectory prediction on synthetic driving scenarios.',
    author='Galen Cuthbertson',
    license='MIT',
    python_requires='>=3.10',
    install_requires=[
        'click',
        'python-dotenv>=0.5.1',
        'numpy',
        'pandas',
        'matplotlib',
        'tqdm',
        'tomli; python_version < "3.11"',
    ],
    entry_points={
        'console_scripts': ['adm=src.cli:main'],
    },
)
