"""Simulated reliable, in-order channel with an optional in-flight interceptor and trace log."""

from collections import Counter
from collections.abc import Callable
from pathlib import Path

from src.core.logging import get_logger
from src.keyproto.messages import ProtocolMessage

logger = get_logger(__name__)

Interceptor = Callable[[ProtocolMessage], ProtocolMessage | None]


class SimulatedChannel:
    """
    Delivers protocol messages in send order.

    Every hop of a message is one transmission (zero for sink-local delivery). An
    interceptor may replace or drop a message in flight (tamper and replay tests);
    the trace records what was sent.
    """

    def __init__(self, interceptor: Interceptor | None = None, record_trace: bool = False):
        self.interceptor = interceptor
        self.record_trace = record_trace
        self.round_index = 0
        self.sent: Counter[str] = Counter()
        self.transmissions = 0
        self.trace: list[str] = []
        self.log: list[ProtocolMessage] = []

    def deliver(self, msg: ProtocolMessage, hops: int = 1) -> ProtocolMessage | None:
        self.sent[msg.kind.value] += 1
        self.transmissions += hops
        if self.record_trace:
            self.trace.append(
                f"{self.round_index} {msg.kind.value} {msg.sender} {msg.receiver} {msg.payload.hex()}"
            )
            self.log.append(msg)
        if self.interceptor is None:
            return msg
        return self.interceptor(msg)

    @property
    def message_count(self) -> int:
        return sum(self.sent.values())

    def write_trace(self, path: Path) -> None:
        """One line per message: `round kind sender receiver payload_hex`."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for line in self.trace:
                f.write(line + "\n")
        logger.info("Protocol trace written", path=str(path), messages=len(self.trace))
