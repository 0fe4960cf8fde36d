"""Order-zero holomorphic maps of C^2 with prescribed primitive periodic points."""

__version__ = "0.1.0"
