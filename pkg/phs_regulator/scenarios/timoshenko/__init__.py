"""Timoshenko beam scenario"""
