"""Desk-scale text-to-music latent diffusion pipeline and evaluation toolkit."""

__version__ = "0.1.0"
