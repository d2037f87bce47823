"""Watch two agents build their first few words, one game at a time.

    python demos/first_games.py
"""
import numpy as np

from langgame import Agent, SceneSet, build_scenes, generate_synthetic, play_game
from langgame.engine import GameStreams

data = generate_synthetic(4, 3, 20, np.random.default_rng(1))
scenes = build_scenes(range(len(data.values)), 200, (3, 5), np.random.default_rng(2))
world = SceneSet(data, scenes)
agents = [Agent(i, data.channels, data.channels, rng=np.random.default_rng(10 + i)) for i in range(2)]
streams = GameStreams.from_seed(0)

for g in range(1, 21):
    r = play_game(agents, world, streams, True, g)
    what = "invented" if r.invented else "adopted" if r.adopted else "success" if r.success else "miss"
    print(f"game {g:2d}: agent {r.speaker_id} says {r.utterance or '-':8s} -> {what}")

for agent in agents:
    print(f"agent {agent.id}: " + ", ".join(f"{w.form} ({w.score:.2f})" for w in agent.inventory))
