"""Broadcast channels carrying finite data tuples.

An output never blocks the sender; it reaches exactly those receivers whose
guard accepts the bound payload.  Messages are not persisted: whoever is not
listening at send time never sees them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable


class CommError(ValueError):
    pass


@dataclass(frozen=True)
class Seq:
    """Finite sequence with 1-based function-application indexing."""

    items: tuple = ()

    def __call__(self, i: int):
        if not 1 <= i <= len(self.items):
            raise IndexError(f"index {i} outside 1..{len(self.items)}")
        return self.items[i - 1]

    @property
    def length(self) -> int:
        return len(self.items)

    def __add__(self, other: "Seq") -> "Seq":
        return Seq(self.items + other.items)

    @staticmethod
    def of(*items) -> "Seq":
        return Seq(tuple(items))


@dataclass(frozen=True)
class Channel:
    name: str
    arity: int
    element_kinds: tuple = ()


@dataclass(frozen=True)
class Message:
    channel: str
    payload: tuple
    sender: str
    sent_at: float = 0.0


@dataclass
class Listener:
    """One party offered a message: a guard to ask, an action on acceptance."""

    uid: str
    car: str
    guard: Callable[[Message], bool]
    accept: Callable[[Message], None]


@dataclass
class Bus:
    channels: dict = field(default_factory=dict)

    def declare_channel(self, name: str, arity: int, element_kinds=()) -> Channel:
        if name in self.channels:
            raise CommError(f"channel {name!r} already declared")
        ch = Channel(name, arity, tuple(element_kinds))
        self.channels[name] = ch
        return ch

    def check(self, msg: Message) -> Channel:
        ch = self.channels.get(msg.channel)
        if ch is None:
            raise CommError(f"unknown channel {msg.channel!r}")
        if len(msg.payload) != ch.arity:
            raise CommError(
                f"channel {msg.channel!r} carries {ch.arity} values, "
                f"got {len(msg.payload)}"
            )
        return ch

    def broadcast(self, msg: Message, listeners) -> list:
        """Deliver to every matching listener; returns (uid, accepted) pairs.

        Guards are all evaluated before any acceptance runs, so every
        receiver judges the same state.  Within one car the listeners are
        offered in the given order and the first acceptance consumes the
        message.  The sender never receives its own broadcast.
        """
        self.check(msg)
        report = []
        winners = []
        taken_cars = set()
        for listener in listeners:
            if listener.car == msg.sender or listener.car in taken_cars:
                continue
            verdict = bool(listener.guard(msg))
            report.append((listener.uid, verdict))
            if verdict:
                winners.append(listener)
                taken_cars.add(listener.car)
        for listener in winners:
            listener.accept(msg)
        return report
