# Geometry, finite element and I/O utilities for fsispectra
