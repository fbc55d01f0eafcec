from arena.simulation.eventlog import EventLog
from arena.simulation.replay import replay
from arena.simulation.report import ArenaReport, build_report
from arena.simulation.runner import run_arena

__all__ = ["ArenaReport", "EventLog", "build_report", "replay", "run_arena"]
