"""Numerics for bidomain Allen-Cahn and FitzHugh-Nagumo fronts and pulses.

Modules
-------
symbols      bidomain Fourier multiplier and rotated conductivities
frank        Frank plot, convex hull contact arcs, Wulff shape, zigzag speeds
analytic     closed-form fronts, normalized pulses, small-l eigen coefficients
periodic     splitting scheme on the doubly periodic box
strip        moving-frame Crank-Nicolson solver on the compactified strip
stability    transverse eigenproblem of planar fronts
front_shape  steady (rotating) zigzag fronts by fixed-point iteration
diagnostics  level sets, peaks, flank angles, speeds, Wulff distance
cli          command line and experiment recipes
"""

__version__ = "0.1.0"
