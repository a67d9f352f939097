from __future__ import annotations

import asyncio
import logging
from collections import defaultdict
from typing import Dict, List

from .models import Event
from .time_utils import now_utc

logger = logging.getLogger(__name__)

HISTORY_LIMIT = 500


class EventBus:
    """Keeps the events of one experiment run and fans them out to subscribers."""

    def __init__(self) -> None:
        self._subscribers: Dict[str, List[asyncio.Queue[Event]]] = defaultdict(list)
        self._history: List[Event] = []

    def subscribe(self, topic: str) -> asyncio.Queue[Event]:
        queue: asyncio.Queue[Event] = asyncio.Queue()
        self._subscribers[topic].append(queue)
        return queue

    async def emit(self, topic: str, source: str, title: str, memo: str, **payload) -> Event:
        event = Event(
            timestamp=now_utc(),
            topic=topic,
            source=source,
            title=title,
            memo=memo,
            payload=payload,
        )
        await self.publish(event)
        return event

    def record(self, event: Event) -> None:
        logger.debug("%s/%s: %s", event.topic, event.source, event.memo)
        self._history.append(event)
        if len(self._history) > HISTORY_LIMIT:
            self._history = self._history[-HISTORY_LIMIT:]
        targets = list(self._subscribers.get(event.topic, []))
        targets += list(self._subscribers.get("*", []))
        for queue in targets:
            queue.put_nowait(event)

    async def publish(self, event: Event) -> None:
        self.record(event)

    def recent(self, limit: int = 50) -> List[Event]:
        return self._history[-limit:]

    def count(self, topic: str) -> int:
        return sum(1 for event in self._history if event.topic == topic)


def serialize_events(events: List[Event]) -> List[Dict[str, object]]:
    return [event.to_dict() for event in events]
