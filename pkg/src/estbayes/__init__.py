"""Real-time grid-Bayesian estimation of the singlet-triplet qubit gradient
frequency with energy-selective-tunneling readout, as a closed-loop simulator."""

__version__ = "0.1.0"
