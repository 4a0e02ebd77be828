"""Real-time handover control: pose observation, proactive tracking, QP whole-body control."""

__version__ = "0.1.0"
