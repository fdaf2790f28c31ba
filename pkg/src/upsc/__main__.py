import sys

from upsc.cli import main

sys.exit(main())
