"""Allow ``python -m pace.bench`` as an alias for the console script."""

from .cli import main

main()
