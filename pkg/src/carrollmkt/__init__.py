"""Networked combinatorial LMSR prediction markets over Carroll structures.

Subsystems:

* structure   - proposition networks and feasible-outcome enumeration
* engine      - exact combinatorial LMSR: cost, prices, trades, solvency
* mutation    - live structure growth (atomic, negative-init, golden-ratio)
* segmentation- bounded-part approximate markets with phantom reconciliation
* leverage    - phantom-purchase restake and the attack lab
* scenario    - scenario-file parsing
* harness     - scenario runner and canonical JSON reports
* kernels     - compiled/NumPy per-trade numeric kernels
"""

from .engine import MarketState, PHI_INCREMENT, Security, TradeReceipt
from .errors import CarrollError
from .kernels import BACKEND as KERNEL_BACKEND
from .leverage import (
    AttackConfig,
    AttackReport,
    ExtractionParams,
    RestakeEvent,
    capital_extraction_attack,
    manipulation_free_variation,
    nand_triple_market,
    restake,
    restake_bonus_surface,
    ria_attack,
    ria_sweep,
)
from .mutation import (
    MutationReceipt,
    add_atomic_live,
    add_edge_golden_ratio,
    add_edge_negative_init,
)
from .scenario import Scenario, parse_scenario
from .segmentation import (
    DivergenceReport,
    IterationReport,
    Partition,
    ScriptTrade,
    SegmentedMarket,
    compare_exact,
    iterate_cycles,
    partition_tree,
    random_script,
)
from .structure import Assignment, CarrollStructure, OutcomeSpace, Proposition, Relation
from .harness import canonical_json, run

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackReport",
    "Assignment",
    "CarrollError",
    "CarrollStructure",
    "DivergenceReport",
    "ExtractionParams",
    "IterationReport",
    "KERNEL_BACKEND",
    "MarketState",
    "MutationReceipt",
    "OutcomeSpace",
    "PHI_INCREMENT",
    "Partition",
    "Proposition",
    "Relation",
    "RestakeEvent",
    "Scenario",
    "ScriptTrade",
    "SegmentedMarket",
    "Security",
    "TradeReceipt",
    "add_atomic_live",
    "add_edge_golden_ratio",
    "add_edge_negative_init",
    "canonical_json",
    "capital_extraction_attack",
    "compare_exact",
    "iterate_cycles",
    "manipulation_free_variation",
    "nand_triple_market",
    "parse_scenario",
    "partition_tree",
    "random_script",
    "restake",
    "restake_bonus_surface",
    "ria_attack",
    "ria_sweep",
    "run",
]
