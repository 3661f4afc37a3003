import sys

from wikiupdate.cli import main

sys.exit(main())
