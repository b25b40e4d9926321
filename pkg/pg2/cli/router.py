from pg2 import __version__
from pg2.cli.commands import evaluate, generate, sweep, toy, train
from pg2.cli.common import ArgumentParser

COMMANDS = [toy, train, generate, evaluate, sweep]


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="pg2", description="Pose guided person image generation")
    parser.add_argument("--version", action="version", version=f"pg2 {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    # Each command module registers its own sub-command
    for module in COMMANDS:
        module.register(subparsers)
    return parser
