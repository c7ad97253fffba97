"""GAN training as a finite zero-sum game, solved with Parallel Nash Memory."""

__version__ = "0.1.0"
