import sys

from bellkit.cli import main

sys.exit(main())
