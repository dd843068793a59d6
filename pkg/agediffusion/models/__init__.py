# flake8: noqa
# import models into model package

from agediffusion.models.category_scheme import CategoryScheme
from agediffusion.models.graph import EdgeListSchema, Graph
from agediffusion.models.partition import NodePartition, NodeRoles, Role
from agediffusion.models.propagation import PropagationConfig, PropagationState, ProbabilityTable
from agediffusion.models.labeling import Assignment, QuotaPlan
from agediffusion.models.laplacian import OperatorMatrices
from agediffusion.models.metrics import HitsRow, HitsTable, MetricBin, NodeMetrics
from agediffusion.models.homophily import AgeMatrix, GapProfile, Regression, ShuffleTest
from agediffusion.models.synth import SynthConfig, SyntheticGraph
