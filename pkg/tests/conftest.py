import os

import pytest

from posmine.blocktree import (
    GENESIS,
    MINER1,
    MINER2,
    GameState,
    PublishPath,
    WAIT,
    Wait,
    begin_round,
    height,
    initial_state,
    on_chain,
    parse_statefile,
)
from posmine.strategies import StrategyDecision

DATA = os.path.join(os.path.dirname(__file__), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA, name)


@pytest.fixture
def example_fig_state() -> GameState:
    with open(data_path("example_fig.state")) as fh:
        return parse_statefile(fh.read())


def play_rounds(state: GameState, creators, m2_extends=True):
    """Drive rounds onto a state: each creator draws a block; Miner 2's
    blocks go straight on the tip (frontier).  Miner 1's stay withheld."""
    for c in creators:
        n = begin_round(state, c)
        if c == MINER2 and m2_extends:
            state._publish_one(n, state.tip())
    return state


@pytest.fixture
def race_state() -> GameState:
    """Miner 2 owns the 2-chain 0-1-2; Miner 1 holds blocks 3 and 4."""
    st = initial_state()
    play_rounds(st, [MINER2, MINER2, MINER1, MINER1])
    return st


class TopHeavyRacer:
    """Test double: waits for a pool two deeper than the chain, then
    publishes the *newest* blocks from the cycle base and settles,
    abandoning the oldest.  Valid and timeserving but never orderly."""

    name = "topheavy"

    def reset(self) -> None:
        pass

    def attach(self, state: GameState) -> None:
        pass

    def decide(self, half) -> StrategyDecision:
        st = half.state
        pool = sorted(st.unpublished_1)
        h = st.tip_height()
        if len(pool) >= h + 2:
            top = frozenset(pool[-(h + 1):])
            return StrategyDecision(PublishPath(top, GENESIS), True)
        if h >= len(pool) + 4:
            return StrategyDecision(WAIT, True)
        return StrategyDecision(WAIT, False)


class LadderRacer:
    """Test double: overtakes from genesis without settling, then keeps
    re-basing later overtakes on the highest block the previous hop threw
    off the chain.  Valid and timeserving, but the hop bases are dead
    blocks, so the publishes are not longest-chain moves."""

    name = "ladder"

    def reset(self) -> None:
        pass

    def attach(self, state: GameState) -> None:
        pass

    def decide(self, half) -> StrategyDecision:
        st = half.state
        pool = sorted(st.unpublished_1)
        h = st.tip_height()
        rungs = [
            b
            for b in st.creator
            if st.is_published(b) and not on_chain(st, b)
        ]
        if rungs:
            r = max(rungs, key=lambda b: height(st, b))
            usable = [b for b in pool if b > r]
            need = h - height(st, r) + 1
            if 0 < need <= len(usable):
                hop = frozenset(usable[-need:])
                return StrategyDecision(PublishPath(hop, r), False)
        if len(pool) >= h + 2:
            top = frozenset(pool[-(h + 1):])
            return StrategyDecision(PublishPath(top, GENESIS), False)
        if h >= len(pool) + 4:
            return StrategyDecision(WAIT, True)
        return StrategyDecision(WAIT, False)


def script_from_trace(trace):
    """Turn a recorded trace into a Scripted move list (replayable on the
    same seed)."""
    moves = []
    for i in range(trace.rounds()):
        action, cap = trace.m1_actions[i], trace.cap_flags[i]
        if not isinstance(action, Wait) or cap:
            moves.append((i + 1, action, cap))
    return moves


def non_lcm_script():
    """A short hand-built game where the second publish forks from a block
    that has already been displaced off the chain (so it is not LCM):
    round 3 overtakes Miner 2's block 1, round 5 forks from that dead
    block 1 and overtakes again."""
    creators = [MINER2, MINER1, MINER1, MINER1, MINER1]
    moves = [
        (3, PublishPath(frozenset({2, 3}), GENESIS), False),
        (5, PublishPath(frozenset({4, 5}), 1), True),
    ]
    return creators, moves
