from .models import BirthComponent, BirthModel, MeasurementModel, MotionModel
from .phd import GaussianMixture, PhdFilter, PhdParams
from .mbm import Hypothesis, MbmFilter, MbmParams

__all__ = ["BirthComponent", "BirthModel", "MeasurementModel", "MotionModel", "GaussianMixture",
           "PhdFilter", "PhdParams", "Hypothesis", "MbmFilter", "MbmParams"]
