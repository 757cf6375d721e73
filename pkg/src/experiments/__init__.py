from .scenario import ScenarioSpec, load_inputs
from .runner import run
