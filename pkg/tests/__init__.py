"""Unit test package for fieldroad."""
