import sys

from gdrf.main import main

sys.exit(main())
