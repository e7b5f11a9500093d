"""Dynamic Bayesian network structure learning from frequent fixed-delay episodes."""

from .episodes import Episode, EpisodeCounter, FrequencyTable, count_aligned, count_distinct, mine_frequent
from .events import Alphabet, EventStream, discretize, format_events, parse_events
from .learner import DbnStructure, ParentSet, candidates_for, learn, to_dot
from .marginals import IndicatorSet, episode_of, joint_distribution, mutual_information
from .simulator import GroundTruth, NetworkSpec, make_topology, simulate, surrogate

__all__ = [
    "Alphabet", "DbnStructure", "Episode", "EpisodeCounter", "EventStream", "FrequencyTable",
    "GroundTruth", "IndicatorSet", "NetworkSpec", "ParentSet", "candidates_for", "count_aligned", "count_distinct",
    "discretize", "episode_of", "format_events", "joint_distribution", "learn", "make_topology",
    "mine_frequent", "mutual_information", "parse_events", "simulate", "surrogate", "to_dot",
]
