from setuptools import find_packages, setup

install_requires = [
  "numpy==2.0.0",
  "pandas==2.2.3",
  "pydantic==2.9.2",
  "rich==13.7.1",
  "scipy==1.14.1",
  "tqdm==4.66.4",
]

extras_require = {
  "formatting": ["yapf==0.40.2",],
  "testing": [
    "mpmath==1.3.0",
    "pytest==8.3.3",
    "pytest-asyncio==0.24.0",
  ],
}

setup(
  name="gtgb2",
  version="0.1.0",
  packages=find_packages(exclude=["test", "test.*"]),
  install_requires=install_requires,
  extras_require=extras_require,
  entry_points={"console_scripts": ["gtgb2 = gtgb2.main:run"]},
)
