import sys

from drml_iv.cli import main

sys.exit(main())
