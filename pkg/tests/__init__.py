"""Tests for heavytail"""
