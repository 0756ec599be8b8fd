"""Unit test package for rieszlab."""
