import logging
import math
import os

import mlflow
from mlflow.exceptions import MlflowException

logger = logging.getLogger(__name__)


def setup(uri="http://localhost:5000/", experiment_name="flex-market"):
    try:
        mlflow.set_tracking_uri(uri)
        mlflow.set_experiment(experiment_name)
        return True
    except (ConnectionRefusedError, MlflowException) as err:
        logger.warning("MLflow server could not be found: %s", err)
        return False


def _flatten(d, prefix=""):
    flat = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, prefix=f"{key}."))
        else:
            flat[key] = v
    return flat


def log_run(params, metrics, out_dir=None, run_name=None):
    """Logs a finished run: scenario parameters, numeric summary values and the output directory as artifacts."""
    metrics = {k: float(v) for k, v in _flatten(metrics).items()
               if isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)}
    with mlflow.start_run(run_name=run_name):
        for k, v in _flatten(params).items():
            mlflow.log_param(k, v)
        for k, v in metrics.items():
            mlflow.log_metric(k, v)
        if out_dir is not None and os.path.isdir(out_dir):
            mlflow.log_artifacts(out_dir)
