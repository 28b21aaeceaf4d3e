"""
Command-line pipelines over the atlas library.

Run as `python -m pipelines.atlas <analyze|sweep|verify|probe> ...`.
"""
