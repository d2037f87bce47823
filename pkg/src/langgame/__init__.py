"""Decentralised emergence of a shared lexicon in populations of language-game agents."""
from .agent import Agent, LearningParams, ProductionResult, Word, generate_form
from .concepts import (ChannelStat, ConceptRepresentation, IncomparableChannels,
                       best_channel_subset, channel_similarity, concept_concept_similarity,
                       discriminative_power, entity_concept_similarity, hellinger_similarity,
                       shift_weight, welford_update)
from .engine import GameRecord, SceneSet, Schedule, Simulation, evaluate, play_game
from .metrics import MetricsTracker
from .world import Dataset, Scene, build_scenes, generate_synthetic, load_dataset, split_entities

__version__ = "0.1.0"
