"""Segment matching, localization and caption metrics"""
