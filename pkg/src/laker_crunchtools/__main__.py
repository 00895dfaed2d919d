"""Entry point for python -m laker_crunchtools."""

from . import main

if __name__ == "__main__":
    main()
