import sys

from vlcsim.cli import main

sys.exit(main())
