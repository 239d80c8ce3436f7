"""H5W annotation of the agent's current situation."""

from __future__ import annotations

from typing import Any, Mapping

from ..dac.encoding import nearest_worker
from ..dac.memory import H5W


def h5w_annotate(frame, worker_cues: Mapping[int, str], what: Any, where: Any, when: int,
                 why: Any, how: dict | None = None) -> H5W:
    """who is the nearest visible worker (ties to the lower cue id), mapped back to its id."""
    cue = nearest_worker(frame, list(worker_cues))
    who = worker_cues[cue] if cue is not None else None
    return H5W(who, what, where, when, why, how)
