#!/usr/bin/env python3
"""
Database setup script for the GWNTF results store.
"""

import sys
from gwntf.db_init import initialize_database


def main():
    """Setup the results database."""
    success = initialize_database()
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
