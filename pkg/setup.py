# -*- coding: utf-8 -*-

try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

LDESC = '''
Space-time DeepKriging

Quantile neural-network interpolation of irregular space-time station data
on a multi-resolution radial basis embedding, with non-crossing prediction
intervals, and stacked (convolutional) LSTM quantile forecasters trained on
the interpolated series. Ships a Matérn space-time field simulator and a
cross-validation harness with an inverse-distance baseline.
'''

setup(name='st_deepkriging',
      version = '0.1.0',
      description = 'Space-time DeepKriging interpolation and quantile forecasting',
      long_description = LDESC,
      license = 'MIT',
      packages = ['st_deepkriging'],
      entry_points = {
          'console_scripts': [
              'stdk = st_deepkriging.cli:cli',
          ],
      },
      include_package_data = False,
      zip_safe = True,
      platforms = 'any',
      python_requires = '>=3.9',
      install_requires = [
          "click",
          'attrs',
          "numpy>=1.22",
          "scipy>=1.8",
          "pandas>=1.4",
          "scikit-learn>=1.0",
          "opentelemetry-api>=1.20.0",
          "opentelemetry-sdk>=1.20.0",
          "opentelemetry-exporter-otlp-proto-http>=1.20.0",
      ],
      extras_require = {
          'test': ["pytest>=7"],
      },
      keywords = 'kriging spatio-temporal interpolation quantile regression LSTM ConvLSTM forecasting',
      classifiers = [
          'Development Status :: 4 - Beta',
          'Operating System :: OS Independent',
          'License :: OSI Approved :: MIT License',
          'Programming Language :: Python',
          'Programming Language :: Python :: 3',
          'Programming Language :: Python :: 3.9',
          'Programming Language :: Python :: 3.10',
          'Programming Language :: Python :: 3.11',
          'Programming Language :: Python :: 3.12',
          'Programming Language :: Python :: 3.13',
          'Topic :: Scientific/Engineering :: Information Analysis',
          'Topic :: Scientific/Engineering :: Atmospheric Science',
      ]
)
