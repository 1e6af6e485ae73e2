#!/usr/bin/env python3
"""
Setup script for fblab: virtual environment, dependencies, .env and output directory
"""
import os
import subprocess
import sys
from pathlib import Path


def run_command(command, description):
    """Run a command and handle errors"""
    print(f"\n{description}...")
    try:
        subprocess.run(command, shell=True, check=True, capture_output=True, text=True)
        print(f" {description}: done")
        return True
    except subprocess.CalledProcessError as e:
        print(f" {description} failed: {e.stderr}")
        return False


def check_python_version():
    version = sys.version_info
    if version.major != 3 or version.minor < 9:
        print(" Python 3.9 or newer is required")
        return False
    print(f" Python {version.major}.{version.minor}.{version.micro} detected")
    return True


def setup_environment():
    """Create venv, install requirements, copy .env.example and create the runs directory"""
    print(" Setting up fblab...\n")

    if not check_python_version():
        return False

    if not Path("venv").exists():
        if not run_command(f"{sys.executable} -m venv venv", "Creating virtual environment"):
            return False

    if os.name == 'nt':
        activate_script = "venv\\Scripts\\activate"
        pip_command = "venv\\Scripts\\pip"
    else:
        activate_script = "source venv/bin/activate"
        pip_command = "venv/bin/pip"

    if not run_command(f"{pip_command} install --upgrade pip", "Upgrading pip"):
        return False
    if not run_command(f"{pip_command} install -r requirements.txt", "Installing dependencies"):
        return False

    if not Path(".env").exists() and Path(".env.example").exists():
        run_command("copy .env.example .env" if os.name == 'nt' else "cp .env.example .env",
                    "Creating .env")

    Path(os.getenv("FBLAB_OUT", "runs")).mkdir(exist_ok=True)
    print(" Output directory created")

    print(f"""
Setup complete.

Next steps:
1. Activate the environment: {activate_script}
2. Run the oracle suite:     ./run.sh validate
3. Run the tests:            pytest -m "not slow"
""")
    return True


def main():
    ok = setup_environment()
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a build backend (pip install): package metadata lives in pyproject.toml
        from setuptools import setup
        setup()
    else:
        main()
