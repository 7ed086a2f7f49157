import sys

from halpern_cat1.cli import main

sys.exit(main())
