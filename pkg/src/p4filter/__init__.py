"""Deterministic software-switch pipeline with layered TCP defenses.

Switches run a fixed match-action pipeline (stateless firewall, stateful
Bloom-pair firewall, port knocking, IPv4 forwarding) under a central
controller that turns an allow/deny list into installed rules. A small
discrete-event network runs scripted scenarios end to end.
"""

__version__ = "0.1.0"
