"""
Tests for nullboot.
"""
