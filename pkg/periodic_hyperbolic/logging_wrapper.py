import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Dict, List, Optional

import pytz

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S.%f"


def _utc_now() -> datetime:
    return datetime.now(pytz.utc)


def _stamp(moment: Optional[datetime]) -> Optional[str]:
    # millisecond resolution
    return None if moment is None else moment.strftime(TIMESTAMP_FORMAT)[:-3]


@dataclass
class EventLog:
    """Wall-clock span of one named event. Re-entering an event restarts its span."""

    name: str
    start: Optional[datetime] = None
    end: Optional[datetime] = None
    children: List[str] = field(default_factory=list)

    def open(self):
        self.start = _utc_now()
        self.end = None

    def close(self):
        self.end = _utc_now()

    @property
    def seconds(self) -> float:
        if self.start is None or self.end is None:
            return 0.0
        return (self.end - self.start).total_seconds()

    def to_dict(self) -> Dict:
        return {
            "total_time_seconds": self.seconds,
            "start_time": _stamp(self.start),
            "end_time": _stamp(self.end),
            "children": list(self.children),
        }


@dataclass
class StageLog:
    """Events of one pipeline stage, keyed by name, plus the stage's operator usage."""

    name: str
    events: Dict[str, EventLog] = field(default_factory=dict)
    operator_usage: Dict[str, int] = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "time_usage": {name: event.to_dict() for name, event in self.events.items()},
            "operator_usage": dict(self.operator_usage),
            "event_count": len(self.events),
            "total_wall_time": self.wall_time,
        }


class LoggingWrapper:
    """Timing log of the runner: pipeline stages and the (possibly nested) events inside them.

    ``usage_source`` is called when a stage closes; its counts (operator
    applications, SVDs) are stored with the stage.
    """

    def __init__(self, usage_source: Optional[Callable[[], Dict[str, int]]] = None):
        self.usage_source = usage_source
        self.stages: Dict[str, StageLog] = {}
        self._active: Optional[StageLog] = None
        self._open_events: List[EventLog] = []

    @property
    def pipeline_stage_active(self) -> bool:
        return self._active is not None

    def _require_stage(self) -> StageLog:
        if self._active is None:
            raise RuntimeError("No pipeline stage is currently active.")
        return self._active

    def _close_stage(self, started: float):
        stage = self._active
        stage.wall_time = time.time() - started
        if self.usage_source is not None:
            stage.operator_usage = self.usage_source()
        self._active = None
        self._open_events = []

    @contextmanager
    def log_pipeline_stage(self, pipeline_stage: str):
        if self._active is not None:
            logger.warning(f"stage {self._active.name!r} still active, closing it before {pipeline_stage!r}")
            self._close_stage(time.time())
        started = time.time()
        self._active = self.stages[pipeline_stage] = StageLog(name=pipeline_stage)
        try:
            yield
        except Exception as e:
            logger.error(f"Error occurred during pipeline stage '{pipeline_stage}': {e}")
            raise
        finally:
            self._close_stage(started)

    @contextmanager
    def log_event(self, event_name: str):
        stage = self._require_stage()
        event = stage.events.get(event_name)
        if event is None:
            event = stage.events[event_name] = EventLog(name=event_name)
            if self._open_events:
                self._open_events[-1].children.append(event_name)
        event.open()
        self._open_events.append(event)
        try:
            yield
        finally:
            event.close()
            self._open_events.pop()

    def dump_logging_and_reset(self, reset_logging: bool = True) -> Dict[str, Dict]:
        log_dump = {name: stage.to_dict() for name, stage in self.stages.items()}
        if reset_logging:
            self.stages = {}
        return log_dump
