"""draftkit: a desk-scale writing-assistant engine.

Library surface is organized by capability:

* :mod:`draftkit.tensor`, :mod:`draftkit.optim` — autodiff substrate.
* :mod:`draftkit.lm` — tiny causal/masked LMs and training objectives.
* :mod:`draftkit.decode` — greedy/beam/nucleus/contrastive decoding.
* :mod:`draftkit.corrector` — CRF substitutions + insertion/deletion probes.
* :mod:`draftkit.infill` — blank-filling generation, BM25, masked baseline.
* :mod:`draftkit.metrics` — diversity, novelty, sentence-level PRF.
* :mod:`draftkit.polish` — phrase polishing and sentence expansion.
* :mod:`draftkit.datapipe` — paraphrase mining and filtering.
* :mod:`draftkit.store` — archives and configuration.
* :mod:`draftkit.service`, :mod:`draftkit.cli` — HTTP and command line.
"""

__version__ = "0.1.0"
