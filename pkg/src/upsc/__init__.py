"""Input admittance, passivity and stability analysis of a grid-forming converter
with power synchronization, vector current control and QV/PV droop loops."""

from upsc.admittance import AdmittanceModel, FreqResponseMatrix, eval_D, eval_W, eval_Y
from upsc.blocks import BlockSet, ControllerParams, OperatingPoint, build_blocks, \
    operating_point
from upsc.grid import GridImpedance
from upsc.passivity import FrequencyGrid, PassivityCurve, SweepSpec, passivity_index, \
    sensitivity_study, sweep
from upsc.ratfun import Polynomial, RationalFunction, lowpass
from upsc.stability import NyquistGrid, NyquistResult, eval_Zg, nyquist

__version__ = "0.1.0"

__all__ = [
    "AdmittanceModel", "BlockSet", "ControllerParams", "FreqResponseMatrix",
    "FrequencyGrid", "GridImpedance", "NyquistGrid", "NyquistResult", "OperatingPoint",
    "PassivityCurve", "Polynomial", "RationalFunction", "SweepSpec", "build_blocks",
    "eval_D", "eval_W", "eval_Y", "eval_Zg", "lowpass", "nyquist", "operating_point",
    "passivity_index", "sensitivity_study", "sweep",
]
