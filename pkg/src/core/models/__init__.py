"""Timeline, perturbation, response and report value types"""
