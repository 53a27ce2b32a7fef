from gdrf.models.counts import CountMatrices
from gdrf.models.gdrf_model import GdrfModel, IterationDiagnostics
from gdrf.models.gp_state import GPState
from gdrf.models.grid import DensityField, DiscretizationGrid
from gdrf.models.ground_truth import GroundTruth
from gdrf.models.observations import Observation, Observations
from gdrf.models.rost_model import RostModel

__all__ = [
    "CountMatrices", "GPState", "GdrfModel", "IterationDiagnostics",
    "DiscretizationGrid", "DensityField", "GroundTruth",
    "Observation", "Observations", "RostModel",
]
