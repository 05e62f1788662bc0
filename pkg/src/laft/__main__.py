import sys

from laft.cli import main

sys.exit(main())
