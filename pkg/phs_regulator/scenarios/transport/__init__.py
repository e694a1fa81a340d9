"""One-field transport scenario"""
