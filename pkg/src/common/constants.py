from pathlib import Path

import pandas as pd

"""
Project constants
"""
# Market design
ORIGIN = pd.Timestamp("1970-01-01", tz="UTC")  # Instances start at multiples of M_DUR counted from here
M_RES = pd.Timedelta("5min")  # Period length
M_WIN = pd.Timedelta("24h")  # Window of a single market instance
M_DUR = pd.Timedelta("3h")  # Spacing between consecutive instances
BP_MAX = 1.0  # Buy price at alpha = 0 [GBP/kWh]
SP_MAX = None  # Sell price at alpha = 0, None passes BP_MAX through [GBP/kWh]
PRICING_CURVE = "linear"
PRICING_MODE = "per-period"
GAMMA_TARGET = 0.95
C_CTRL = 0.30  # Unit price paid to controllable suppliers of essential energy [GBP/kWh]

PRICING_CURVES = ("linear", "quadratic")
PRICING_MODES = ("per-period", "paper-literal")
APPROACHES = ("fair_play", "volume_max", "revenue_max")

MARKET_KWARGS = dict(
    window=M_WIN,
    spacing=M_DUR,
    resolution=M_RES,
    bp_max=BP_MAX,
    sp_max=SP_MAX,
    curve=PRICING_CURVE,
    gamma_target=GAMMA_TARGET,
    pricing_mode=PRICING_MODE,
    c_ctrl=C_CTRL
)


# Characteriser
P_BASE = 0.25  # Quantisation level for total power [kW]
P_THRESHOLD = 1.0  # Minimum mean power of a flexible block [kW]
T_THRESHOLD = pd.Timedelta("30min")  # Minimum duration of a flexible block
BASELOAD_PERCENTILE = 10  # Per household-day, the level block energy is measured from
MAX_FILL_GAP = pd.Timedelta("30min")  # Zero-order hold limit for consumption gaps
SUPPLY_MAX_FILL_GAP = pd.Timedelta("2h")  # Hold-forward limit for missing supply half-hours

CHARACTERIZER_KWARGS = dict(
    p_base=P_BASE,
    p_threshold=P_THRESHOLD,
    t_threshold=T_THRESHOLD
)


# Allocation
GAMMA_FLOOR = 1e-3  # Guards 1/Gamma at Gamma = 0
SCORE_SCALE = 1.0
INITIAL_GAMMA = 1.0  # Households without history
EXACT_MAX_REQUESTS = 30
EXACT_MAX_PERIODS = 288
ORACLE_MAX_REQUESTS = 8
ORACLE_MAX_PERIODS = 48
LOCAL_SEARCH_ROUNDS = 3
EXACT_MAX_NODES = 50_000  # Search nodes before branch-and-bound settles for its incumbent


# Supply scaling
UPSILON = 125_000  # Flexibility sweep
UPSILON_SHORTAGE = 100_000  # Two-group shortage experiment
UPSILON_NATIONAL = 107_000  # National generation to national demand


# Experiments
SIGMAS = (0, 3, 6, 12)  # Flexibility levels [h]
SUPPLY_MIXES = tuple(round(0.1 * i, 1) for i in range(11))
FLAT_TARIFF = 0.2084  # [GBP/kWh]
STATIC_TOU_LOW = 0.15  # [GBP/kWh]
STATIC_TOU_HIGH = 0.30  # [GBP/kWh]
STATIC_TOU_PEAKS = ((7, 9), (17, 20))  # Hours of day at the high rate, end exclusive
BP_H_MAX = 1.0  # Default willingness to pay [GBP/kWh]
SHORTAGE_GROUPS = dict(
    g1=dict(gamma=1.0, bp_h_max=1_000_000.0),
    g2=dict(gamma=0.0, bp_h_max=1.0)
)
BUDGET_TOLERANCE = 0.005  # Budget balance to the penny [GBP]


# Synthetic data
N_HOUSEHOLDS = 40
BASELOAD_RANGE = (0.1, 0.3)  # [kW]
APPLIANCE_POWER_RANGE = (1.0, 3.0)  # [kW]
APPLIANCE_DURATION_RANGE = (30, 120)  # [min]
APPLIANCE_RATE = 1.5  # Mean appliance runs per household per day
SYNTH_CASES = ("high_flat", "variable", "low_flat")

SYNTH_KWARGS = dict(
    n_households=N_HOUSEHOLDS,
    start="2021-01-04",
    days=1,
    cases=("variable",),
    baseload_range=BASELOAD_RANGE,
    appliance_power_range=APPLIANCE_POWER_RANGE,
    appliance_duration_range=APPLIANCE_DURATION_RANGE,
    appliance_rate=APPLIANCE_RATE,
    upsilon=UPSILON
)

DATA_ROOT = Path('data')
