"""UAV-ISAC design library.

A UAV with an M-antenna ULA flies over an area, serves K downlink users,
senses E ground targets with a pulse radar while hovering above them, and
offloads the quantized echoes to a base station over a backhaul link.  The
library provides the propagation / radar / power models, an offline sensing
beam synthesis, an alternating-optimization solver for the joint design
(beamformers, sensing power, offload power, sensing schedule, trajectory,
velocity), two baseline schemes, and Monte-Carlo validation oracles.
"""

__version__ = "0.1.0"
