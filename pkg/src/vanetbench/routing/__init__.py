"""Routing protocols behind one node-level interface."""

from .aodv import Aodv
from .aomdv import Aomdv
from .base import RoutingProtocol
from .dsdv import Dsdv
from .olsr import Olsr

PROTOCOLS = {
    "aodv": Aodv,
    "aomdv": Aomdv,
    "dsdv": Dsdv,
    "olsr": Olsr,
}


def make_protocol(name: str, stack) -> RoutingProtocol:
    try:
        cls = PROTOCOLS[name]
    except KeyError:
        raise ValueError(f"unknown routing protocol '{name}'; "
                         f"valid options: {', '.join(sorted(PROTOCOLS))}") from None
    return cls(stack)
