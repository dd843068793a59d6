import os
import typing
from typing import List, Optional

from agediffusion.exceptions import ConfigError
from agediffusion.models.base_model import Model
from agediffusion.models.category_scheme import DEFAULT_AGE_EDGES, CategoryScheme
from agediffusion.models.labeling import PPS_SCOPES
from agediffusion.models.metrics import DEFAULT_POPULATION_FLOOR, MetricBin, parse_bins
from agediffusion.models.partition import LABEL_MODES
from agediffusion.models.propagation import PropagationConfig
from agediffusion.models.pruning import DEFAULT_PRUNE_CAP
from agediffusion.tables import FORMATS

PPS_TARGETS = ('seeds', 'ground_truth')


class RunConfig(Model):
    """Settings of one pipeline run.

    Keys of a config file are the ``attribute_map`` values; ``lambda`` and
    ``iterations`` configure the propagation.
    """

    field_types: typing.Dict[str, type] = {
        'edges': str,
        'labels': str,
        'synth': str,
        'label_mode': str,
        'age_bins': List[float],
        'seed_fraction': float,
        'rng_seed': int,
        'prune_cap': int,
        'lam': float,
        't_end': int,
        'masked': bool,
        'use_weights': bool,
        'pps': bool,
        'pps_scope': str,
        'pps_target': str,
        'tau': float,
        'output': str,
        'format': str,
        'threads': Optional[int],
        'population_floor': int,
        'sin_bins': str,
        'degree_bins': str,
        'dts_values': str,
        'eps': float,
        'shuffles': int,
        'shuffle_labels': bool,
    }

    attribute_map: typing.Dict[str, str] = {
        'edges': 'edges',
        'labels': 'labels',
        'synth': 'synth',
        'label_mode': 'label_mode',
        'age_bins': 'age_bins',
        'seed_fraction': 'seed_fraction',
        'rng_seed': 'rng_seed',
        'prune_cap': 'prune_cap',
        'lam': 'lambda',
        't_end': 'iterations',
        'masked': 'masked',
        'use_weights': 'use_weights',
        'pps': 'pps',
        'pps_scope': 'pps_scope',
        'pps_target': 'pps_target',
        'tau': 'tau',
        'output': 'output',
        'format': 'format',
        'threads': 'threads',
        'population_floor': 'population_floor',
        'sin_bins': 'sin_bins',
        'degree_bins': 'degree_bins',
        'dts_values': 'dts_values',
        'eps': 'eps',
        'shuffles': 'shuffles',
        'shuffle_labels': 'shuffle_labels',
    }

    def __init__(self, edges: str = '', labels: str = '', synth: str = '',
                 label_mode: str = 'age', age_bins: Optional[List[float]] = None,
                 seed_fraction: float = 0.75, rng_seed: int = 0,
                 prune_cap: int = DEFAULT_PRUNE_CAP, lam: float = 0.5, t_end: int = 30,
                 masked: bool = True, use_weights: bool = False, pps: bool = False,
                 pps_scope: str = 'all', pps_target: str = 'seeds', tau: float = 0.0,
                 output: str = 'out', format: str = 'tsv', threads: Optional[int] = None,
                 population_floor: int = DEFAULT_POPULATION_FLOOR, sin_bins: str = '',
                 degree_bins: str = '', dts_values: str = '1,2,3', eps: float = 0.5,
                 shuffles: int = 100, shuffle_labels: bool = False):
        self.edges = edges
        self.labels = labels
        self.synth = synth
        self.label_mode = label_mode
        self.age_bins = list(DEFAULT_AGE_EDGES) if age_bins is None else list(age_bins)
        self.seed_fraction = seed_fraction
        self.rng_seed = rng_seed
        self.prune_cap = prune_cap
        self.lam = lam
        self.t_end = t_end
        self.masked = masked
        self.use_weights = use_weights
        self.pps = pps
        self.pps_scope = pps_scope
        self.pps_target = pps_target
        self.tau = tau
        self.output = output
        self.format = format
        self.threads = threads
        self.population_floor = population_floor
        self.sin_bins = sin_bins
        self.degree_bins = degree_bins
        self.dts_values = dts_values
        self.eps = eps
        self.shuffles = shuffles
        self.shuffle_labels = shuffle_labels

    @property
    def scheme(self) -> CategoryScheme:
        return CategoryScheme.from_edges(self.age_bins)

    @property
    def propagation(self) -> PropagationConfig:
        return PropagationConfig(self.lam, self.t_end, self.masked, self.use_weights)

    def bins(self, which: str) -> Optional[List[MetricBin]]:
        """Configured bins of a metric, None for the defaults"""
        spec = {'sin': self.sin_bins, 'degree': self.degree_bins, 'dts': ''}[which]
        return parse_bins(spec) if spec.strip() else None

    @property
    def joint_columns(self) -> List[MetricBin]:
        return parse_bins(self.dts_values)

    def validate(self, require_inputs: bool = True) -> "RunConfig":
        """Checks parameter ranges, input files and the output directory"""
        self.propagation.validate()
        CategoryScheme.from_edges(self.age_bins)
        if self.label_mode not in LABEL_MODES:
            raise ConfigError(f"label_mode must be one of {LABEL_MODES}, got {self.label_mode!r}")
        if not 0.0 < self.seed_fraction < 1.0:
            raise ConfigError(f"seed_fraction must be in (0, 1), got {self.seed_fraction}")
        if self.prune_cap < 1:
            raise ConfigError(f"prune_cap must be >= 1, got {self.prune_cap}")
        if self.pps_scope not in PPS_SCOPES:
            raise ConfigError(f"pps_scope must be one of {PPS_SCOPES}, got {self.pps_scope!r}")
        if self.pps_target not in PPS_TARGETS:
            raise ConfigError(f"pps_target must be one of {PPS_TARGETS}, got {self.pps_target!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.population_floor < 0:
            raise ConfigError(f"population_floor must be >= 0, got {self.population_floor}")
        if self.eps < 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps}")
        if self.shuffles < 1:
            raise ConfigError(f"shuffles must be >= 1, got {self.shuffles}")
        self.bins('sin')
        self.bins('degree')
        parse_bins(self.dts_values)

        if require_inputs:
            if self.synth:
                _require_file(self.synth, 'synth')
            else:
                _require_file(self.edges, 'edges')
                _require_file(self.labels, 'labels')
        try:
            os.makedirs(self.output, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {self.output}: {e}") from e
        if not os.access(self.output, os.W_OK):
            raise ConfigError(f"output directory {self.output} is not writable")
        return self


def _require_file(path: str, key: str) -> None:
    if not path:
        raise ConfigError(f"'{key}' is required")
    if not os.path.isfile(path):
        raise ConfigError(f"{key} file {path} does not exist")
