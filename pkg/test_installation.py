#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Script to verify the st_deepkriging installation
Run this before training anything; pytest also collects it
"""

import sys
import os

# Fix Windows console encoding for Unicode characters
if sys.platform == 'win32':
    os.system('chcp 65001 >nul 2>&1')
    if sys.stdout.encoding != 'utf-8':
        import io
        sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')

def check_installation():
    """Check all required dependencies; returns the process exit code"""
    print("st_deepkriging - Installation Check")
    print("=" * 50)
    print(f"Python version: {sys.version}")
    print()

    all_ok = True

    print("[1/5] Testing the numerical stack...")
    try:
        from importlib.metadata import version
        import numpy
        import scipy
        import pandas
        import sklearn
        for name in ('numpy', 'scipy', 'pandas', 'scikit-learn'):
            print(f"  ✓ {name} installed: {version(name)}")
        from scipy.linalg import cholesky
        cholesky(numpy.eye(3), lower=True)
        print(f"  ✓ Cholesky factorisation works")
    except ImportError as e:
        print(f"  ✗ numerical stack not available: {e}")
        print(f"  → Install with: pip install -r requirements.txt")
        all_ok = False
    except Exception as e:
        print(f"  ✗ numerical stack error: {e}")
        all_ok = False

    print()

    print("[2/5] Testing click and attrs...")
    try:
        import click
        import attr
        print(f"  ✓ click and attrs import")
    except ImportError as e:
        print(f"  ✗ not available: {e}")
        print(f"  → Install with: pip install click attrs")
        all_ok = False

    print()

    print("[3/5] Testing the st_deepkriging package...")
    try:
        import st_deepkriging
        from st_deepkriging.basis import wendland
        print(f"  ✓ st_deepkriging importable: {st_deepkriging.__version__}")
        if abs(wendland(0.0) - 1.0) < 1e-12 and wendland(1.0) == 0.0:
            print(f"  ✓ basis kernels evaluate")
        else:
            print(f"  ✗ Wendland kernel gives unexpected values")
            all_ok = False
        from st_deepkriging.presets import presets
        print(f"  ✓ {len(presets)} simulation preset(s): {', '.join(presets)}")
    except ImportError as e:
        print(f"  ✗ st_deepkriging not available: {e}")
        print(f"  → Install with: pip install -e .")
        all_ok = False
    except Exception as e:
        print(f"  ✗ st_deepkriging error: {e}")
        all_ok = False

    print()

    print("[4/5] Testing OpenTelemetry (metrics export)...")
    try:
        import opentelemetry.sdk.metrics
        print(f"  ✓ opentelemetry-sdk installed")
        if os.getenv('OTEL_ENABLED', 'false').lower() == 'true':
            print(f"  ✓ metrics export enabled to {os.getenv('OTEL_EXPORTER_OTLP_ENDPOINT', '(no endpoint!)')}")
        else:
            print(f"  ℹ metrics export disabled (set OTEL_ENABLED=true to enable)")
    except ImportError as e:
        print(f"  ✗ OpenTelemetry not available: {e}")
        print(f"  → Install with: pip install -r requirements.txt")
        all_ok = False

    print()

    print("[5/5] Testing configuration...")
    config_file = os.getenv('STDK_CONFIG') or ('config.json' if os.path.exists('config.json') else None)
    if config_file:
        try:
            from st_deepkriging.config import RunConfigManager
            manager = RunConfigManager(config_file)
            manager.train_config()
            manager.forecast_config()
            print(f"  ✓ {config_file} is a valid run configuration")
            network = manager.section('network')
            print(f"     - taus: {network['taus']}")
            print(f"     - forecaster: {manager.section('forecast')['variant']}")
        except Exception as e:
            print(f"  ✗ Error reading {config_file}: {e}")
            all_ok = False
    else:
        print(f"  ℹ no config.json found, built-in defaults apply")
        print(f"  → Create one with: cp config.example.json config.json")

    print()
    print("=" * 50)

    if all_ok:
        print("✅ All required dependencies are installed!")
        print()
        print("Next steps:")
        print("1. Simulate a field: stdk simulate --preset smoke -o field.csv")
        print("2. Train the interpolator: stdk train-interp field.csv -o interp")
        print("3. Run the tests: pytest")
        return 0
    else:
        print("❌ Some required dependencies are missing")
        print()
        print("Install all dependencies with:")
        print("  pip install -r requirements.txt")
        return 1


def test_installation():
    assert check_installation() == 0


if __name__ == '__main__':
    sys.exit(check_installation())
