"""Numerics for Cauchy transforms and rectifiable curves on planar point clouds."""
