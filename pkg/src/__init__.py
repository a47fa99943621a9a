# Texture Separation

__version__ = "0.1.0"
