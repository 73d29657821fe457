"""Consistency checks for logarithmic price-impact functions with order-book feedback."""

from impact_consistency.core import (
    BookState,
    ImpactParams,
    MarketOrder,
    apply_order,
    fresh_book,
    impact,
    inverse_impact,
)
from impact_consistency.arbitrage import (
    ChainOutcome,
    GameScript,
    Leg,
    optimal_trader1,
    optimal_trader2,
    run_game,
    trader2_gain,
)
from impact_consistency.consistency import (
    ExploitabilityVerdict,
    PhaseDiagram,
    classify_stock,
    critical_kappa,
    exploitable,
    n0_min,
    scan_plane,
)
from impact_consistency.estimation import (
    ResponseEstimates,
    TradeRecord,
    Trades,
    estimate_params,
    read_trades_csv,
    response,
    write_trades_csv,
)
from impact_consistency.synth import GeneratorConfig, generate

__version__ = "0.1.0"
