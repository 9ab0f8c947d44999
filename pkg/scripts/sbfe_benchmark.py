"""Greedy, exact, oracle and static filter ordering on the synthetic formula suite.

Thin wrapper over ``orbitsched bench-sbfe``; takes the same flags.
"""

import sys

from orbitsched.cli import main

if __name__ == "__main__":
    sys.exit(main(["bench-sbfe", *sys.argv[1:]]))
