"""Deterministic hub-based collective decision simulator and operator gateway.

The package is organized around a discrete-event engine with a fixed tick
clock (`engine`), an operator command protocol (`commands`), seeded scenario
generation (`scenario`), an append-only event log with replay verification
(`events`), situational-awareness probes (`probes`), pure metric formulas
(`metrics`), a headless batch runner (`runner`), and a live session gateway
speaking a length-prefixed frame protocol over WebSocket (`wire`, `gateway`).
"""

__version__ = "0.1.0"
