"""Core modules for settings, experiment config and errors"""
