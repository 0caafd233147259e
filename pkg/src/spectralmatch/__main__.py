import sys

from spectralmatch.cli import main

sys.exit(main())
