"""
Suite Runner
Runs the LPC Augment unit tests without pytest

    python run_tests.py                  every tests/test_*.py
    python run_tests.py pole_warp cli    only test_pole_warp.py and test_corpus_cli.py
"""

import logging
import os
import sys
import unittest

ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, ROOT)


def load_suite(names):
    """Whole tests/ directory, or just the modules whose name contains one of names"""
    loader = unittest.TestLoader()
    tests_dir = os.path.join(ROOT, 'tests')
    if not names:
        return loader.discover(tests_dir, pattern='test_*.py', top_level_dir=ROOT)

    modules = sorted(f[:-3] for f in os.listdir(tests_dir)
                     if f.startswith('test_') and f.endswith('.py'))
    picked = [m for m in modules if any(name in m for name in names)]
    if not picked:
        raise SystemExit(f"no test module matches {' '.join(names)}; have {', '.join(modules)}")
    return loader.loadTestsFromNames([f"tests.{m}" for m in picked])


def run_tests(names=()):
    # keep expected passthrough and peak-limit warnings out of the report
    logging.basicConfig(level=logging.ERROR)

    result = unittest.TextTestRunner(verbosity=2).run(load_suite(list(names)))

    print("\n" + "=" * 70)
    print("LPC AUGMENT TEST SUMMARY")
    print("=" * 70)
    print(f"Tests run: {result.testsRun}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")
    print(f"Skipped: {len(result.skipped)}")

    if result.wasSuccessful():
        print("\n✅ ALL TESTS PASSED!")
        return 0
    print("\n❌ SOME TESTS FAILED")
    return 1


if __name__ == '__main__':
    sys.exit(run_tests(sys.argv[1:]))
