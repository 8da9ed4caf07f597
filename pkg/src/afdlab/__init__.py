"""afdlab: score, rank and discover approximate functional dependencies.

The main entry points are re-exported here; see the submodules for the rest.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .discovery import FdCandidate, ScoredCandidate, discover, enumerate_candidates, rank, score_all
from .errors import AfdError, BudgetExceeded, ContractError, ParseError, RefusalError, SchemaError
from .evaluation import GroundTruth, PrCurve, pr_curve, rank_at_max_recall, separation
from .measures import ALL_MEASURES, MeasureId, Score, score
from .relation import ContingencyTable, Relation, contingency, load_csv

__all__ = [
    "ALL_MEASURES",
    "AfdError",
    "BudgetExceeded",
    "ContingencyTable",
    "ContractError",
    "FdCandidate",
    "GroundTruth",
    "MeasureId",
    "ParseError",
    "PrCurve",
    "RefusalError",
    "Relation",
    "SchemaError",
    "Score",
    "ScoredCandidate",
    "contingency",
    "discover",
    "enumerate_candidates",
    "load_csv",
    "pr_curve",
    "rank",
    "rank_at_max_recall",
    "score",
    "score_all",
    "separation",
]
