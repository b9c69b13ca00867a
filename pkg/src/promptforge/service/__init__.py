"""Operational wrapper: event-sourced persistence, HTTP API, and CLI."""

from .events import CorruptLog, EventLog
from .manager import SessionBusy, SessionManager, UnknownSession, replay_events
