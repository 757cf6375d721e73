import dataclasses
import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd

import src.common.constants as const
from src.allocation.fair_play import FairnessPolicy
from src.common.data import SynthSpec, synth_generate, synth_tariff
from src.common.exceptions import InputError, CoverageError
from src.common.grid import TimeGrid, to_utc, to_timedelta
from src.common.loaders import load_consumption_csv, load_supply_csv, load_tariff_csv, scale_supply
from src.common.series import SupplyProfile, ConsumptionSeries
from src.consumption.characterizer import CharacterizerParams
from src.market.core import MarketConfig, Offer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything one experiment needs, loadable from a single JSON document.

    Data comes either from CSV files (`consumption`, `supply`, optional `tariff`) or from a synthetic `synth`
    description (`SynthSpec`).
    """
    consumption: Optional[str] = None
    supply: Optional[str] = None
    tariff: Optional[str] = None
    synth: Optional[SynthSpec] = None
    upsilon: float = const.UPSILON
    sigma: float = 0.0  # [h]
    approach: str = "fair_play"
    market: MarketConfig = field(default_factory=MarketConfig)
    policy: FairnessPolicy = field(default_factory=FairnessPolicy)
    characterizer: CharacterizerParams = field(default_factory=CharacterizerParams)
    seed: int = 0
    period: Optional[Tuple[str, str]] = None
    bp_h_max: float = const.BP_H_MAX
    heuristic: bool = False
    offers: Tuple[Offer, ...] = ()

    def __post_init__(self):
        if self.synth is None and (self.consumption is None or self.supply is None):
            raise InputError("A scenario needs either `synth` or both `consumption` and `supply` files")
        if self.approach not in const.APPROACHES:
            raise InputError(f"Unknown approach '{self.approach}', choose from {const.APPROACHES}")
        if not self.upsilon > 0:
            raise InputError("upsilon must be positive")
        if self.sigma < 0:
            raise InputError("sigma must be non-negative")
        if self.seed is None or int(self.seed) < 0:
            raise InputError("A non-negative seed is required")
        if self.period is not None and to_utc(self.period[1]) <= to_utc(self.period[0]):
            raise InputError("Scenario period must end after it starts")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        market = {k: d.pop(k) for k in list(d) if k in MarketConfig.__dataclass_fields__}
        market.update(d.pop("market", {}))
        d["market"] = MarketConfig.from_dict(market)
        d["policy"] = FairnessPolicy.from_dict(d.pop("policy", {}))
        d["characterizer"] = CharacterizerParams.from_dict(d.pop("characterizer", {}))
        if d.get("synth") is not None:
            d["synth"] = SynthSpec.from_dict(d["synth"])
        if "sigma" in d:
            d["sigma"] = float(to_timedelta(d["sigma"], "h") / pd.Timedelta("1h"))
        if d.get("period") is not None:
            d["period"] = tuple(d["period"])
        d["offers"] = tuple(Offer(**o) for o in d.get("offers", ()))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"Unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except json.JSONDecodeError as err:
            raise InputError(f"{path} is not valid JSON: {err}")

    def replace(self, **kwargs):
        market = {k: kwargs.pop(k) for k in list(kwargs) if k in MarketConfig.__dataclass_fields__}
        spec = dataclasses.replace(self, **{k: v for k, v in kwargs.items() if v is not None})
        if any(v is not None for v in market.values()):
            spec = dataclasses.replace(spec, market=spec.market.with_options(**market))
        return spec

    def to_dict(self):
        return dict(
            consumption=self.consumption, supply=self.supply, tariff=self.tariff,
            synth=self.synth.to_dict() if self.synth else None,
            upsilon=self.upsilon, sigma=self.sigma, approach=self.approach, market=self.market.to_dict(),
            policy=dataclasses.asdict(self.policy),
            characterizer=dict(p_base=self.characterizer.p_base, p_threshold=self.characterizer.p_threshold,
                               t_threshold=str(self.characterizer.t_threshold)),
            seed=int(self.seed), period=list(self.period) if self.period else None, bp_h_max=self.bp_h_max,
            heuristic=self.heuristic, n_offers=len(self.offers)
        )

    def generators(self):
        """Independent generators for data synthesis and for market decisions."""
        data_seq, market_seq = np.random.SeedSequence(int(self.seed)).spawn(2)
        return np.random.default_rng(data_seq), np.random.default_rng(market_seq)


@dataclass
class ScenarioInputs:
    grid: TimeGrid
    series: list
    supply: SupplyProfile  # scaled to the cohort
    tariff: Optional[pd.Series] = None


def _restrict_period(spec, grid):
    if spec.period is None:
        return grid
    start, end = map(to_utc, spec.period)
    if start < grid.start or end > grid.end:
        raise CoverageError(f"Scenario period {start} to {end} lies outside the data, {grid.start} to {grid.end}")
    return TimeGrid(start, end, grid.resolution)


def load_inputs(spec, data_rng=None):
    """Households, scaled supply and optional tariff on the scenario's grid."""
    resolution = spec.market.resolution
    tariff = None
    if spec.synth is not None:
        data_rng = data_rng if data_rng is not None else spec.generators()[0]
        series, national = synth_generate(spec.synth, data_rng)
        tariff = synth_tariff(series, national, spec.synth.upsilon)
    else:
        series = load_consumption_csv(spec.consumption, resolution)
        national = load_supply_csv(spec.supply, resolution)
    if not series:
        raise InputError("Scenario has no consumption data")

    grid = _restrict_period(spec, series[0].grid)
    if national.grid.start > grid.start or national.grid.end < grid.end:
        raise CoverageError(f"Supply covers {national.grid.start} to {national.grid.end}, "
                            f"consumption needs {grid.start} to {grid.end}")
    supply = scale_supply(national.restrict(grid), spec.upsilon)
    if grid != series[0].grid:
        lo = grid.offset_in(series[0].grid)
        series = [ConsumptionSeries(s.household_id, grid, s.power[lo:lo + len(grid)]) for s in series]

    if spec.tariff is not None:
        tariff = load_tariff_csv(spec.tariff, resolution, grid)
    elif tariff is not None:
        tariff = tariff.reindex(grid.periods, method="ffill")
    logger.info("Loaded %d households over %s to %s", len(series), grid.start, grid.end)
    return ScenarioInputs(grid, series, supply, tariff)
