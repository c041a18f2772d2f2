import sys

from cpdm_fso.cli import main

sys.exit(main())
