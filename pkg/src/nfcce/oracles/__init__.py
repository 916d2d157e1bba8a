"""Pricing oracles for the master problem's sigma columns."""

from .base import OracleColumn, OracleQuery, PricingOracle, SigmaObjective, UnsupportedGame
from .milrc import MilpOracle, Variant, build_milrc, mi_lrc, purify
from .milp import MilpInstance, solve_milp
from .plansearch import PlanSearchOracle, c_plan_search, p_lrc

__all__ = [
    "MilpInstance",
    "MilpOracle",
    "OracleColumn",
    "OracleQuery",
    "PlanSearchOracle",
    "PricingOracle",
    "SigmaObjective",
    "UnsupportedGame",
    "Variant",
    "build_milrc",
    "c_plan_search",
    "mi_lrc",
    "p_lrc",
    "purify",
    "solve_milp",
]
