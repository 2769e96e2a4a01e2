"""metakey: episodic meta-learning for crop-row keypoint regression.

Subpackages
-----------
``taskdata``
    Manifest loading, day-keyed task collections, split construction,
    episodic sampling, and the synthetic crop-row generator.
``kpnet``
    The keypoint regression network: functional forward pass over named
    parameter dictionaries, per-step batch-norm statistics, and the
    keypoint L1 loss.
``metacore``
    Inner-loop adaptation and outer meta-updates with multi-step loss
    weighting, per-layer per-step learned inner rates, derivative-order
    annealing, and cosine outer-rate annealing.
``baseline``
    Conventional pooled training and plain-SGD finetuning.
``harness``
    Experiment configs, checkpoints, training/evaluation drivers, reports,
    and the ``metakey`` command line.
"""

__version__ = "0.1.0"
