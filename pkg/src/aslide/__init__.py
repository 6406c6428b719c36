"""Height-differential end-to-end routing on an adversarially scheduled network, with an offline optimum to compare against."""

__version__ = "0.1.0"
