from .engine import MarketEngine, SimulationResult
from .core import MarketConfig, Request, Offer, HouseholdRecord
