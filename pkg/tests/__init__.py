"""Padesum test suite."""
