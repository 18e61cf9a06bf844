import sys

from flexctl.cli import main

sys.exit(main())
