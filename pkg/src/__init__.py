"""
ufrkit source package.
"""
