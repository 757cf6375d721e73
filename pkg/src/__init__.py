from .market import MarketEngine, MarketConfig, Request
from .experiments import ScenarioSpec, run
