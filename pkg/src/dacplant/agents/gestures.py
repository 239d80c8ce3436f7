"""Symbolic gesture vocabulary and its command mapping."""

from __future__ import annotations

from enum import Enum


class Gesture(str, Enum):
    START = "StartG"
    STOP = "StopG"
    REST = "RestG"
    FASTER = "FasterG"
    SLOWER = "SlowerG"


class Command(str, Enum):
    START = "Start"
    STOP = "Stop"
    REST = "RestPosition"
    SPEED_UP = "SpeedUp"
    SLOW_DOWN = "SlowDown"


TABLE = {
    Gesture.START: Command.START,
    Gesture.STOP: Command.STOP,
    Gesture.REST: Command.REST,
    Gesture.FASTER: Command.SPEED_UP,
    Gesture.SLOWER: Command.SLOW_DOWN,
}


def gesture_to_command(symbol) -> Command | None:
    try:
        return TABLE[Gesture(symbol)]
    except ValueError:
        return None
