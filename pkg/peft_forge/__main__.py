import sys

from peft_forge.experiment.cli import main

sys.exit(main())
