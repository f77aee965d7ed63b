"""
The rerw command line
=====================

Every capability is reachable from the shell.  This script drives the same
entry point in-process; the equivalent shell commands are shown alongside.
"""

from rerw.cli import main

commands = [
    "table --p 0.9 --c 1 --q 1 --format text",
    "moments --p 0.6 --c 0.5 --n 1000",
    "simulate --p 0.35 --c 1 --steps 100000 --seed 1 --grid 0.1,0.5,1 --format text",
    "diagnose --p 0.35 --c 1 --steps 5000 --replicates 100000 --format text",
    "verify --p 0.6 --c 0 --steps 5000 --replicates 1000 --seed 4 --format text",
    "verify --p 1.5 --c 1",
]
for cmd in commands:
    print(f"$ rerw {cmd}")
    code = main(cmd.split())
    print(f"[exit {code}]\n")
