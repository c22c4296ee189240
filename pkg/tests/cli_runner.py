"""Tiny shared helper: invoke the CLI in-process and return its exit code."""

from aoii_jam.cli import main


def run_cli(*argv) -> int:
    return main(list(argv))
