"""Business Logic Services"""
