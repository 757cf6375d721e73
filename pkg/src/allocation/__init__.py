from .fair_play import fair_play_run, FairnessPolicy
from .optimisers import volume_max_solve, revenue_max_solve
