"""vmesh: bake analytic scenes into a hybrid mesh + sparse-volume container,
render it deterministically on the CPU, and validate it against a brute-force
reference renderer."""

__version__ = "0.1.0"
