"""Core: value types, metrics and pipeline services"""
