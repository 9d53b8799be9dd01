"""Shared helpers: exceptions, console output, files, templates."""
