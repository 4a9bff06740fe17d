"""Fedosov deformation quantization on almost-Kaehler charts, with a
lattice Klein-Gordon front end for the field-theoretic structures."""

__version__ = "0.1.0"
