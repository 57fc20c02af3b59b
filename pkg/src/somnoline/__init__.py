"""somnoline: PSG upload/split/score platform with gray-area review support.

Subpackages map to the pipeline's responsibilities: ``edf`` (bit-exact
EDF/EDF+ I/O and night splitting), ``staging`` (stages, hypnograms,
hypnodensities), ``scoring`` (pluggable automatic scorer), ``gray``
(certainty thresholds and gray masks), ``agreement`` (Fleiss multi-rater
kappa), ``queueing``/``workers`` (durable job pipeline), ``service`` (HTTP
front end), ``report``/``bench``/``cli`` (operator tooling).
"""

__version__ = "0.1.0"
