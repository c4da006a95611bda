"""
Test modules.
"""
