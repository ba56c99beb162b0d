#!/usr/bin/env python3
"""
Test runner script for the heat-pump supervisory control toolkit.
"""
import sys
import os
from pathlib import Path

# Add the src directory to Python path
project_root = Path(__file__).parent
src_dir = project_root / 'app' / 'src'
sys.path.insert(0, str(src_dir))

# The CLI entry point lives one level up
app_dir = project_root / 'app'
sys.path.insert(1, str(app_dir))

# Set environment variable for config path (for testing)
os.environ.setdefault('CONFIGPATH', str(project_root / 'app' / 'config.yml.template'))

if __name__ == "__main__":
    try:
        import pytest
    except ImportError:
        print("Error: pytest is not installed. Please run:")
        print("pip install -r requirements.txt")
        sys.exit(1)

    args = [str(project_root / 'tests'), '--tb=short', '--no-header']
    # --fast skips the long closed-loop and Monte Carlo checks
    if '--fast' in sys.argv[1:]:
        args.extend(['-m', 'not slow'])

    print(f"Python path includes:")
    print(f"  - {src_dir}")
    print(f"  - {app_dir}")
    print(f"Config path: {os.environ.get('CONFIGPATH')}")
    print("-" * 50)

    sys.exit(pytest.main(args))
