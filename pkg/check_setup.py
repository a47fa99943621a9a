#!/usr/bin/env python3
"""Validate that the texture separation environment is ready."""

import importlib
import sys
from pathlib import Path

REQUIRED = ("numpy", "scipy", "PIL", "dotenv", "pydantic")


def check_python() -> bool:
    """Ensure Python 3.12+."""
    v = sys.version_info
    ok = v.major >= 3 and v.minor >= 12
    print(f"  Python {v.major}.{v.minor}.{v.micro}: {'✓' if ok else '✗ (need 3.12+)'}")
    return ok


def check_deps() -> bool:
    """Ensure required packages are installed."""
    missing = []
    for name in REQUIRED:
        try:
            importlib.import_module(name)
        except ImportError:
            missing.append(name)
    if missing:
        print(f"  Dependencies: ✗ (missing {', '.join(missing)})")
        print("    Run: pip install -r requirements.txt")
        return False
    print(f"  Dependencies ({', '.join(REQUIRED)}): ✓")
    return True


def check_env() -> bool:
    """.env is optional; report whether overrides are in effect."""
    env_path = Path(__file__).parent / ".env"
    if not env_path.exists():
        print("  .env file: - (using built-in defaults; see .env.example)")
        return True
    from src.config import solver_defaults

    try:
        defaults = solver_defaults()
    except Exception as e:
        print(f"  .env file: ✗ ({e})")
        return False
    ok = 0 < defaults["tau"] <= 0.125 and defaults["max_iterations"] >= 1 and defaults["tolerance"] > 0
    print(f"  .env file: {'✓' if ok else '✗ (TEXSEP_TAU must be in (0, 0.125])'}")
    return ok


def main() -> None:
    print("Texture Separation - Setup Check\n")
    results = [
        check_python(),
        check_deps(),
        check_env(),
    ]
    if all(results):
        print("\n✓ All checks passed. Ready to run!")
    else:
        print("\n✗ Fix the items above, then run again.")
        sys.exit(1)


if __name__ == "__main__":
    main()
