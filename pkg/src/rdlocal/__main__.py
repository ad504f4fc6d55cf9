import sys

from rdlocal.cli import main

sys.exit(main())
