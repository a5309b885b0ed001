"""Model specifications, builders, windowing and the ARIMA baseline."""
from .arima import ArimaParams, arima_fit_forecast, css_residuals, fit_arima, one_step_predictions, select_orders
from .specs import (
    DISPLAY_NAMES,
    FAMILIES,
    NEURAL_FAMILIES,
    PUBLISHED_PARAM_RANGES,
    ModelSpec,
    architecture,
    build_model,
    closed_form_parameter_count,
    count_parameters,
    default_spec,
    model_from_architecture,
    with_regularization,
)
from .windows import WindowSpec, make_windows, partition_windows

__all__ = [
    "ArimaParams", "arima_fit_forecast", "css_residuals", "fit_arima", "one_step_predictions", "select_orders",
    "DISPLAY_NAMES", "FAMILIES", "NEURAL_FAMILIES", "PUBLISHED_PARAM_RANGES", "ModelSpec", "architecture",
    "build_model", "closed_form_parameter_count", "count_parameters", "default_spec", "model_from_architecture",
    "with_regularization", "WindowSpec", "make_windows", "partition_windows",
]
