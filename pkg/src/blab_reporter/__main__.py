"""Main entry point for blab-reporter."""
from .cli import main

if __name__ == "__main__":
    main()
