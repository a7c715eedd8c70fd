"""Near-field XL-MIMO channel simulation and GAN-based channel estimation."""
__version__ = "0.1.0"
