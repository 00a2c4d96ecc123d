import asyncio
import sys
import os

# fix path so we can run from root
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))

from stim_clone.cli import main

if __name__ == "__main__":
    try:
        import uvloop
        asyncio.set_event_loop_policy(uvloop.EventLoopPolicy())
    except ImportError:
        pass

    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(130)
