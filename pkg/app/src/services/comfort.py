"""Predicted mean vote and percentage dissatisfied (steady-state heat balance)."""
import logging
import math
from typing import Iterable

import numpy as np

from models import ComfortInputs


logger = logging.getLogger(__name__)

MAX_ITERATIONS = 150
SURFACE_TOLERANCE = 0.00015
MET_TO_WM2 = 58.15


class ComfortError(Exception):
    """Raised when the clothing surface temperature iteration fails."""
    pass


def pmv(inputs: ComfortInputs, external_work_met: float = 0.0) -> float:
    """Predicted mean vote on the seven-point thermal sensation scale.

    Air speed is used as relative air speed. The clothing surface temperature
    is found by damped fixed-point iteration.

    Raises:
        ComfortError: If the iteration does not converge in 150 steps.
    """
    ta = inputs.t_air
    tr = inputs.t_radiant
    pa = inputs.rh * 10.0 * math.exp(16.6536 - 4030.183 / (ta + 235.0))

    icl = 0.155 * inputs.clo
    m = inputs.met * MET_TO_WM2
    mw = m - external_work_met * MET_TO_WM2
    f_cl = 1.0 + 1.29 * icl if icl <= 0.078 else 1.05 + 0.645 * icl
    hcf = 12.1 * math.sqrt(inputs.air_speed)

    taa = ta + 273.0
    tra = tr + 273.0
    t_cla = taa + (35.5 - ta) / (3.5 * icl + 0.1)

    p1 = icl * f_cl
    p2 = p1 * 3.96
    p3 = p1 * 100.0
    p4 = p1 * taa
    p5 = 308.7 - 0.028 * mw + p2 * (tra / 100.0) ** 4

    xn = t_cla / 100.0
    xf = t_cla / 50.0
    hc = hcf
    iterations = 0
    while abs(xn - xf) > SURFACE_TOLERANCE:
        xf = (xf + xn) / 2.0
        hcn = 2.38 * abs(100.0 * xf - taa) ** 0.25
        hc = max(hcf, hcn)
        xn = (p5 + p4 * hc - p2 * xf ** 4) / (100.0 + p3 * hc)
        iterations += 1
        if iterations > MAX_ITERATIONS:
            raise ComfortError(
                f"clothing surface temperature did not converge for t_air={ta}, t_radiant={tr}")

    tcl = 100.0 * xn - 273.0

    skin_diffusion = 3.05e-3 * (5733.0 - 6.99 * mw - pa)
    sweating = 0.42 * (mw - MET_TO_WM2) if mw > MET_TO_WM2 else 0.0
    latent_respiration = 1.7e-5 * m * (5867.0 - pa)
    dry_respiration = 0.0014 * m * (34.0 - ta)
    radiation = 3.96 * f_cl * (xn ** 4 - (tra / 100.0) ** 4)
    convection = f_cl * hc * (tcl - ta)

    sensitivity = 0.303 * math.exp(-0.036 * m) + 0.028
    load = (mw - skin_diffusion - sweating - latent_respiration - dry_respiration
            - radiation - convection)
    return sensitivity * load


def ppd(pmv_value: float) -> float:
    """Predicted percentage dissatisfied; 5% at a neutral vote."""
    return 100.0 - 95.0 * math.exp(-0.03353 * pmv_value ** 4 - 0.2179 * pmv_value ** 2)


def mean_ppd(temperatures: Iterable[float], template: ComfortInputs) -> float:
    """Time-average PPD of an indoor temperature trajectory.

    Each temperature is used as both air and mean radiant temperature; the
    remaining factors come from ``template``.
    """
    values = [ppd(pmv(ComfortInputs(t_air=float(t), t_radiant=float(t),
                                    air_speed=template.air_speed, rh=template.rh,
                                    met=template.met, clo=template.clo)))
              for t in temperatures]
    if not values:
        raise ValueError("cannot average PPD over an empty trajectory")
    return float(np.mean(values))
