"""Entry point for `python -m lzhomodyne`."""

import sys

from .cli import main

sys.exit(main())
