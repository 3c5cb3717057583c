"""Offline programming and simulation for robot-assisted press-brake bending."""
