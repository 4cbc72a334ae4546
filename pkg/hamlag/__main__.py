import sys

from hamlag.cli import main

sys.exit(main())
