"""rnnfast: cycle-level model of a domain-wall-memory RNN accelerator.

Subpackages cover the Q8.8 arithmetic core, racetrack device and EDC model,
LSTM/GRU/Vanilla compute units, network-to-hardware mapping, the cycle/energy
simulator, the overshift fault-injection harness, and a double-precision
reference oracle.
"""

__version__ = "0.1.0"
