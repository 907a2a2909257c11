from __future__ import annotations

try:
    from colorama import init as colorama_init  # type: ignore

    colorama_init()
except Exception:
    # colorama is optional; fall back to raw ANSI sequences when unavailable.
    pass

RESET = "\033[0m"
BOLD = "\033[1m"
ACCENT = "\033[96m"  # cyan
SUCCESS = "\033[92m"  # green
INFO = "\033[94m"  # blue
WARNING = "\033[93m"  # yellow
ERROR = "\033[91m"  # red
MUTED = "\033[90m"  # dim gray

LEVEL_COLORS = {
    "DEBUG": MUTED,
    "INFO": INFO,
    "WARNING": WARNING,
    "ERROR": ERROR,
    "CRITICAL": BOLD + ERROR,
}


def paint(text: str, color: str, enabled: bool = True) -> str:
    """Wrap ``text`` in ``color`` unless colouring is disabled."""
    if not enabled or not color:
        return text
    return f"{color}{text}{RESET}"
