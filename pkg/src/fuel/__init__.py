"""Fuel: a small intermediate language with capability-checked memory management.

The package provides the textual IL front end (`fuel.parser`, `fuel.printer`),
the static capability checker (`fuel.checker`), an instrumented reference
interpreter (`fuel.interp`), and the fuzzing/differential-testing harness
(`fuel.harness`, `fuel.oracle`).  The command line lives in `fuel.cli` and a
small HTTP facade over the same operations in `fuel.service`.
"""

__version__ = "0.1.0"
