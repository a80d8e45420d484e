"""Graphs used throughout the tests and documentation, in text form."""

from .graph import parse_graph

IV = """\
# instrumental variables: U unobserved
Z -> X
X -> Y
latent U
U -> X
U -> Y
"""

IV_NO_EFFECT = """\
Z -> X
latent U
U -> X
U -> Y
"""

# IV model with a possible direct effect of Z on Y
IV_DIRECT = IV + "Z -> Y\n"

# unrelated confounding: X confounded with Z and with Y by separate latents
UC = """\
X -> Z
X -> Y
latent U1
latent U2
U1 -> X
U1 -> Z
U2 -> X
U2 -> Y
"""

# three independent latents drawn as bidirected edges
GADGET = """\
Z -> Y
W -> X
W <-> Y
X <-> Z
Z <-> W
"""

GADGET_EFFECT = GADGET + "X -> Y\n"

NAMED = {
    "iv": IV,
    "iv-no-effect": IV_NO_EFFECT,
    "iv-direct": IV_DIRECT,
    "uc": UC,
    "gadget": GADGET,
    "gadget-effect": GADGET_EFFECT,
}


def named_graph(name: str):
    return parse_graph(NAMED[name])
