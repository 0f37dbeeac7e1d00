"""Stand-in solver for error-path tests: answers every check-sat per ``mode``."""

import sys
import time

mode = sys.argv[1]
for line in sys.stdin:
    line = line.strip()
    if line.startswith("(check-sat"):
        if mode == "crash":
            sys.exit(3)
        if mode == "hang":
            time.sleep(60)
        if mode == "garbage":
            print("banana", flush=True)
        elif mode == "error":
            print('(error "no")', flush=True)
        elif mode == "unknown":
            print("unknown", flush=True)
    elif line.startswith("(exit"):
        break
