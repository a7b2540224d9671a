"""Disturbance-observer NMPC for quadrotor aerial grasping, with a desk-scale simulator."""

__version__ = "0.1.0"
