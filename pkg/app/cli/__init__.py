"""Command-line Front End"""
