"""Monte Carlo and raster tools for isoperimetric inequalities of stochastic processes."""

__version__ = "0.1.0"
