"""VAE training with an STFT phase/amplitude reconstruction loss, in numpy."""

from .errors import StftVaeError

__version__ = "0.1.0"
__all__ = ["StftVaeError", "__version__"]
