"""Reference geometries used by the examples, the CLI and the test-suite."""
from __future__ import annotations

from typing import List

from mdflow.geometry import Fracture, FractureNetwork

CONDUCTIVE = 1e4
BARRIER = 1e-4
APERTURE = 1e-2


def three_orthogonal_fractures() -> FractureNetwork:
    """Three full fractures in the coordinate planes of [-1, 1]^3."""
    return FractureNetwork(
        3,
        (-1.0, -1.0, -1.0),
        (1.0, 1.0, 1.0),
        [
            Fracture("xy", (-1.0, -1.0, 0.0), (1.0, 1.0, 0.0)),
            Fracture("xz", (-1.0, 0.0, -1.0), (1.0, 0.0, 1.0)),
            Fracture("yz", (0.0, -1.0, -1.0), (0.0, 1.0, 1.0)),
        ],
    )


def seven_fracture_fractures() -> List[Fracture]:
    """Axis-aligned seven-fracture network in [0, 2] x [0, 1] x [0, 1].

    ``F1`` connects the right boundary to the centre of the domain. ``F2``
    and ``F3`` block most of the cross-section at x = 0.5, leaving a narrow
    gap. ``F4`` and ``F5`` cross ``F1`` and each other; ``F6`` and ``F7``
    sit isolated in the left part. All coordinates are multiples of 1/8.
    """
    return [
        Fracture("F1", (0.75, 0.5, 0.25), (2.0, 0.5, 0.75)),
        Fracture("F2", (0.5, 0.0, 0.0), (0.5, 0.375, 1.0)),
        Fracture("F3", (0.5, 0.625, 0.0), (0.5, 1.0, 1.0)),
        Fracture("F4", (1.5, 0.25, 0.125), (1.5, 0.75, 0.875)),
        Fracture("F5", (1.25, 0.125, 0.5), (1.75, 0.875, 0.5)),
        Fracture("F6", (0.125, 0.25, 0.25), (0.375, 0.25, 0.75)),
        Fracture("F7", (0.125, 0.5, 0.75), (0.375, 0.875, 0.75)),
    ]


def seven_fracture_network() -> FractureNetwork:
    return FractureNetwork(3, (0.0, 0.0, 0.0), (2.0, 1.0, 1.0), seven_fracture_fractures())


def seven_fracture_objects(conductive: bool = True) -> dict:
    """Per-fracture parameters: F1 conductive (or a barrier too), the rest barriers."""
    objs = {f.id: {"permeability": BARRIER, "aperture": APERTURE} for f in seven_fracture_fractures()}
    if conductive:
        objs["F1"]["permeability"] = CONDUCTIVE
    return objs
