from __future__ import annotations

from django.dispatch import Signal

# Sent after every accepted tell with ``session_id`` and ``evaluation``.
evaluation_told = Signal()

# Sent once a session has spent its budget, with ``session_id`` and ``state``.
session_finished = Signal()
