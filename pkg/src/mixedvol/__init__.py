"""Mixed volumes through Monge-Ampere quadrature, with Brascamp-Lieb and
mixed Hodge-Riemann verification tooling."""

__version__ = "0.1.0"
