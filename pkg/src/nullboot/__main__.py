"""
Allow nullboot to be executed as a module: python -m nullboot
"""

import sys
from nullboot.cli import main

if __name__ == '__main__':
    sys.exit(main())
