"""
Master Script - Run All Checks
Runs `verify` on every experiment config in configs/ and prints a summary table
"""

import subprocess
import sys
from datetime import datetime
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parent.parent
BACKEND_DIR = ROOT_DIR / 'backend'
CONFIG_DIR = ROOT_DIR / 'configs'
OUTPUT_DIR = ROOT_DIR / 'outputs' / 'data'

EXIT_CHECK_FAILED = 2


def run_config(config_path, seed=None):
    """Run one experiment through the CLI; returns its status label"""
    print("\n" + "="*80)
    print(f"Running {config_path.name}...")
    print("="*80)

    command = [sys.executable, '-m', 'app.cli', 'verify',
               '--config', str(config_path), '--output-dir', str(OUTPUT_DIR)]
    if seed is not None:
        command += ['--seed', str(seed)]

    try:
        result = subprocess.run(command, cwd=BACKEND_DIR, capture_output=True, text=True, check=True)
        print(result.stdout)
        return "✓ PASSED"
    except subprocess.CalledProcessError as e:
        print(e.stdout)
        print(e.stderr[-2000:])
        return "✗ FAILED" if e.returncode == EXIT_CHECK_FAILED else "✗ ERROR"
    except OSError as e:
        print(f"UNEXPECTED ERROR: {e}")
        return "✗ ERROR"


def main(argv=None):
    args = sys.argv[1:] if argv is None else argv
    patterns = [a for a in args if not a.startswith('--seed=')] or ['*.json']
    seeds = [a.split('=', 1)[1] for a in args if a.startswith('--seed=')]
    seed = seeds[-1] if seeds else None

    print("="*80)
    print("REINFORCED STOCHASTIC PROCESSES - ACCEPTANCE SUITE")
    print("="*80)
    print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    configs = sorted({path for pattern in patterns for path in CONFIG_DIR.glob(pattern)})
    if not configs:
        print(f"No configs matching {patterns} in {CONFIG_DIR}")
        return 1

    results = {}
    start_time = datetime.now()
    for config_path in configs:
        results[config_path.stem] = run_config(config_path, seed)

    end_time = datetime.now()
    duration = (end_time - start_time).total_seconds()

    # Summary
    print("\n" + "="*80)
    print("ACCEPTANCE SUITE SUMMARY")
    print("="*80)

    for name, status in results.items():
        print(f"  {name:<32} {status}")

    print(f"\nTotal execution time: {duration:.1f} seconds")
    print(f"Completed at: {end_time.strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"Reports in {OUTPUT_DIR}")

    failed = [name for name, status in results.items() if not status.startswith("✓")]
    print("\n" + "="*80)
    print("ALL CHECKS PASSED!" if not failed else f"{len(failed)} EXPERIMENT(S) FAILED: {', '.join(failed)}")
    print("="*80)
    return 0 if not failed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
