from setuptools import setup

setup(name='pivotal',
      version='0.1',
      description="Adversarial training of pivotal classifiers",
      packages=['pivot'],
      py_modules=['pivotcli'],
      scripts=['pivotal'],
      python_requires='>=3.8',
      install_requires=['numpy', 'scipy', 'matplotlib', 'tqdm'],
      extras_require={'test': ['pytest']},
      )
