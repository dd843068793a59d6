import logging
from typing import Dict

from agediffusion.controllers.pipeline import pipeline_stage
from agediffusion.models.synth import SynthConfig, generate_graph, write_synthetic

logger = logging.getLogger(__name__)


def cmd_synth(cfg: SynthConfig) -> Dict[str, str]:
    """Generates a synthetic graph and writes its edge and label files"""
    with pipeline_stage('config'):
        cfg.validate()
    with pipeline_stage('synth'):
        synthetic = generate_graph(cfg)
    with pipeline_stage('write'):
        paths = write_synthetic(synthetic, cfg.output)
    logger.info("Synthetic files written: %s", paths)
    return paths
