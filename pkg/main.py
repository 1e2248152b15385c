#!/usr/bin/env python3
"""
PulseForge - robust pulse synthesis from the command line
"""

import sys

from cli.app import PulseForgeApp, configure_logging
from core.errors import ConfigurationError


def main():
    """Main application entry point"""
    app = PulseForgeApp()

    try:
        args = app.parse_args(sys.argv[1:])
    except ConfigurationError as e:
        print(f"usage error: {e}")
        app.parser.print_usage()
        sys.exit(2)

    configure_logging(args.log_level)
    sys.exit(app.run(args))


if __name__ == "__main__":
    main()
