"""Scaled-down two-player Hanabi.

Standard rules with configurable deck: playing the next rank of a color
scores 1, a misplay costs a life and losing the last life zeroes the score,
hints must touch at least one card and mark every matching card, discards
and completing a color regain a hint. After the last card is drawn each
player gets one more turn.

Card draws are chance transitions, so the deck order is never part of the
state; the hidden information in a state is exactly the players' own hands.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

from .base import DecPomdp, InvalidConfigError

COLOR_NAMES = "RYGBW"
MEMO_LIMIT = 500_000  # entries per transition cache before it is reset

PRESETS = {
    "micro": dict(num_colors=2, ranks=[1, 2], hand_size=1, hint_tokens=1, life_tokens=1, max_turns=8),
    "default": dict(num_colors=2, ranks=[1, 1, 2], hand_size=2, hint_tokens=3, life_tokens=2, max_turns=20),
}


class HanabiState(NamedTuple):
    hands: tuple  # per player: tuple of (color, rank) cards, oldest first
    knowledge: tuple  # per player, per slot: (color_mask, rank_mask) from hints
    deck: tuple  # sorted multiset of undrawn cards
    fireworks: tuple  # per color: highest rank played (0 = none)
    discards: tuple  # sorted multiset
    hints: int
    lives: int
    score: int
    player: int
    turn: int
    final_turns: int  # -1 until the deck runs out
    done: bool


@dataclass
class MiniHanabi(DecPomdp):
    num_colors: int = 2
    ranks: tuple = (1, 2)
    hand_size: int = 1
    hint_tokens: int = 1
    life_tokens: int = 1
    max_turns: int = 8
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ranks = tuple(sorted(self.ranks))
        for key in ("num_colors", "hand_size", "hint_tokens", "life_tokens", "max_turns"):
            if getattr(self, key) <= 0:
                raise InvalidConfigError(f"{key} must be positive", key)
        if not self.ranks or min(self.ranks) <= 0:
            raise InvalidConfigError("ranks must be a nonempty multiset of positive ints", "ranks")
        if self.num_colors > len(COLOR_NAMES):
            raise InvalidConfigError(f"at most {len(COLOR_NAMES)} colors", "num_colors")
        if self.deck_size < self.n_players * self.hand_size:
            raise InvalidConfigError("deck smaller than players x hand_size", "hand_size")
        self.rank_values = tuple(sorted(set(self.ranks)))
        self.max_rank = self.rank_values[-1]
        self.t_max = self.max_turns
        self.n_players = 2
        self.full_deck = tuple(sorted((c, r) for c in range(self.num_colors) for r in self.ranks))
        self._all_colors = (1 << self.num_colors) - 1
        self._all_ranks = (1 << len(self.rank_values)) - 1
        self.n_actions = 2 * self.hand_size + self.num_colors + len(self.rank_values)
        if not self.config:
            self.config = {
                "variant": "mini_hanabi",
                "num_colors": self.num_colors,
                "ranks": list(self.ranks),
                "hand_size": self.hand_size,
                "hint_tokens": self.hint_tokens,
                "life_tokens": self.life_tokens,
                "max_turns": self.max_turns,
            }

    @property
    def deck_size(self) -> int:
        return self.num_colors * len(self.ranks)

    @property
    def max_score(self) -> int:
        return self.num_colors * len(set(self.ranks))

    # -- action encoding -------------------------------------------------
    def play(self, slot):
        return slot

    def discard(self, slot):
        return self.hand_size + slot

    def hint_color(self, color):
        return 2 * self.hand_size + color

    def hint_rank(self, rank):
        return 2 * self.hand_size + self.num_colors + self.rank_values.index(rank)

    def decode_action(self, action):
        h, c = self.hand_size, self.num_colors
        if action < h:
            return ("play", action)
        if action < 2 * h:
            return ("discard", action - h)
        if action < 2 * h + c:
            return ("hint_color", action - 2 * h)
        return ("hint_rank", self.rank_values[action - 2 * h - c])

    def action_name(self, action, player=None):
        kind, arg = self.decode_action(action)
        if kind == "hint_color":
            arg = COLOR_NAMES[arg]
        return f"{kind}:{arg}"

    # -- dynamics ------------------------------------------------------------
    def restore_state(self, obj):
        return HanabiState(*obj)

    def _deals(self, deck, n):
        """All ordered draws of n cards from the multiset ``deck``, as (prob, cards, rest)."""
        if n == 0:
            return [(1.0, (), deck)]
        out = []
        counts = Counter(deck)
        for card, k in sorted(counts.items()):
            rest = list(deck)
            rest.remove(card)
            p = k / len(deck)
            for q, cards, remaining in self._deals(tuple(rest), n - 1):
                out.append((p * q, (card,) + cards, remaining))
        return out

    def initial_support(self):
        h = self.hand_size
        fresh = (self._all_colors, self._all_ranks)
        out = []
        for p, cards, rest in self._deals(self.full_deck, 2 * h):
            state = HanabiState(
                hands=(cards[:h], cards[h:]),
                knowledge=((fresh,) * h, (fresh,) * h),
                deck=rest,
                fireworks=(0,) * self.num_colors,
                discards=(),
                hints=self.hint_tokens,
                lives=self.life_tokens,
                score=0,
                player=0,
                turn=0,
                final_turns=-1,
                done=False,
            )
            out.append((p, state))
        return out

    def is_terminal(self, state):
        return state.done

    def acting_player(self, state):
        return state.player

    def _memo(self, name: str) -> dict:
        table = self.__dict__.get(name)
        if table is None or len(table) > MEMO_LIMIT:
            table = self.__dict__[name] = {}
        return table

    def legal_actions(self, state):
        memo = self._memo("_legal_memo")
        hit = memo.get(state)
        if hit is None:
            hit = memo[state] = self._legal(state)
        return hit

    def _legal(self, state):
        if state.done:
            return ()
        me, partner = state.player, 1 - state.player
        hand = state.hands[me]
        acts = [self.play(i) for i in range(len(hand))]
        if state.hints < self.hint_tokens:
            acts += [self.discard(i) for i in range(len(hand))]
        if state.hints > 0:
            other = state.hands[partner]
            acts += [self.hint_color(c) for c in range(self.num_colors) if any(x[0] == c for x in other)]
            acts += [self.hint_rank(r) for r in self.rank_values if any(x[1] == r for x in other)]
        return tuple(acts)

    def _after_action(self, state, action):
        """Apply the action without drawing; returns (state, reward, needs_draw)."""
        memo = self._memo("_action_memo")
        key = (state, action)
        hit = memo.get(key)
        if hit is None:
            hit = memo[key] = self._apply(state, action)
        return hit

    def _apply(self, state, action):
        kind, arg = self.decode_action(action)
        me, partner = state.player, 1 - state.player
        hands = list(state.hands)
        know = list(state.knowledge)
        fireworks = list(state.fireworks)
        discards = state.discards
        hints, lives, score = state.hints, state.lives, state.score
        reward = 0.0
        needs_draw = False
        done = False
        if kind in ("play", "discard"):
            card = hands[me][arg]
            hands[me] = hands[me][:arg] + hands[me][arg + 1 :]
            know[me] = know[me][:arg] + know[me][arg + 1 :]
            needs_draw = True
            if kind == "play" and fireworks[card[0]] + 1 == card[1]:
                fireworks[card[0]] = card[1]
                score += 1
                reward = 1.0
                if card[1] == self.max_rank and hints < self.hint_tokens:
                    hints += 1
                if score == self.max_score:
                    done = True
            else:
                discards = tuple(sorted(discards + (card,)))
                if kind == "discard":
                    hints += 1
                else:
                    lives -= 1
                    if lives == 0:
                        reward = -float(score)
                        score = 0
                        done = True
        else:
            hints -= 1
            new = []
            for card, (cm, rm) in zip(hands[partner], know[partner]):
                if kind == "hint_color":
                    cm = (1 << arg) if card[0] == arg else cm & ~(1 << arg)
                else:
                    bit = 1 << self.rank_values.index(arg)
                    rm = bit if card[1] == arg else rm & ~bit
                new.append((cm, rm))
            know[partner] = tuple(new)
        nxt = state._replace(
            hands=tuple(hands),
            knowledge=tuple(know),
            fireworks=tuple(fireworks),
            discards=discards,
            hints=hints,
            lives=lives,
            score=score,
            done=done,
        )
        return nxt, reward, needs_draw and bool(state.deck) and not done

    def _end_turn(self, state, drew_last):
        final_turns = state.final_turns
        if final_turns >= 0:
            final_turns -= 1
        if drew_last:
            final_turns = self.n_players
        turn = state.turn + 1
        done = state.done or final_turns == 0 or turn >= self.max_turns
        return state._replace(
            player=1 - state.player, turn=turn, final_turns=final_turns, done=done
        )

    def reward(self, state, action):
        return self._after_action(state, action)[1]

    def step_support(self, state, action):
        memo = self._memo("_step_memo")
        key = (state, action)
        hit = memo.get(key)
        if hit is None:
            hit = memo[key] = self._step_support(state, action)
        return hit

    def _step_support(self, state, action):
        mid, _, needs_draw = self._after_action(state, action)
        if not needs_draw:
            return [(1.0, self._end_turn(mid, False))]
        me = state.player
        fresh = (self._all_colors, self._all_ranks)
        counts = Counter(mid.deck)
        out = []
        for card, k in sorted(counts.items()):
            rest = list(mid.deck)
            rest.remove(card)
            hands = list(mid.hands)
            know = list(mid.knowledge)
            hands[me] = hands[me] + (card,)
            know[me] = know[me] + (fresh,)
            drawn = mid._replace(hands=tuple(hands), knowledge=tuple(know), deck=tuple(rest))
            out.append((k / len(mid.deck), self._end_turn(drawn, not rest)))
        return out

    def observe(self, state, player):
        partner = 1 - player
        return (
            state.hands[partner],
            state.knowledge[player],
            state.knowledge[partner],
            state.fireworks,
            state.discards,
            state.hints,
            state.lives,
            state.score,
            len(state.deck),
            state.player,
            state.final_turns,
            state.done,
        )

    # -- card-knowledge introspection -----------------------------------------
    def possible_cards(self, state, player, slot):
        """Identities ``player`` cannot rule out for their own card in ``slot``.

        Combines positive/negative hint information with card counting over
        everything the player can see.
        """
        cm, rm = state.knowledge[player][slot]
        unseen = Counter(self.full_deck)
        seen = list(state.discards) + list(state.hands[1 - player])
        for c, top in enumerate(state.fireworks):
            seen += [(c, r) for r in range(1, top + 1)]
        unseen.subtract(seen)
        return [
            (c, r)
            for (c, r), k in sorted(unseen.items())
            if k > 0 and cm >> c & 1 and rm >> self.rank_values.index(r) & 1
        ]

    def card_knowledge(self, state, player, slot):
        """(color_known, rank_known) for ``player``'s own card in ``slot``."""
        cards = self.possible_cards(state, player, slot)
        return len({c for c, _ in cards}) == 1, len({r for _, r in cards}) == 1


def mini_hanabi(preset: str = "micro", **overrides) -> MiniHanabi:
    if preset not in PRESETS:
        raise InvalidConfigError(f"unknown mini_hanabi preset {preset!r}", "preset")
    params = {**PRESETS[preset], **overrides}
    return MiniHanabi(**params)
