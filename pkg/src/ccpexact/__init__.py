"""Exact moments of the general coupon collector's problem."""
