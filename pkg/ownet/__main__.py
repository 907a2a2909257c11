from __future__ import annotations

import sys
import traceback
from typing import List, Optional

from ownet_core.colors import ERROR, RESET, WARNING

from .cli import main


def _execute_command(argv: Optional[List[str]]) -> int:
    try:
        return main(argv)
    except SystemExit as exc:
        if isinstance(exc.code, int):
            return exc.code
        if exc.code:
            print(f"{WARNING}{exc.code}{RESET}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print(f"\n{WARNING}Run interrupted by user.{RESET}", file=sys.stderr)
        return 130
    except Exception:
        print(f"{ERROR}Unexpected error running ownet:{RESET}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    raise SystemExit(_execute_command(sys.argv[1:]))
