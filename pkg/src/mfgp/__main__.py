"""Allow ``python -m mfgp``."""

import sys

from .cli import main

sys.exit(main())
