from __future__ import annotations

from segomoe.cli import main

raise SystemExit(main())
