import sys

from trajsanitize.cli import main

sys.exit(main())
