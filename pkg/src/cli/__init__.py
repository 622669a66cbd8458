"""
Command-line surface: run configuration and subcommand implementations.
"""
