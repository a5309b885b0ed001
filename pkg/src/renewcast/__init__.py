"""Forecasting renewable generation from weather: data preparation, statistics,
NumPy neural networks, ARIMA, hyperparameter search and evaluation."""

__version__ = "0.1.0"
