"""Pipeline services: ingestion, synthesis, media, inference, evaluation"""
