"""SHS Survey Toolkit - Application Package"""
