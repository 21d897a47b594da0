import sys

from steerfilter.cli import main

sys.exit(main())
