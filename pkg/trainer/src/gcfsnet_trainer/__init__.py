"""Toy-scale training harness for the binaural filter-and-sum enhancement model.

Self-contained: the forward pass, STFT framing, loss, optimizer plumbing and
the `.gcfs` container serializer are implemented here, independently of the
inference engine. The engine is driven only through its external interfaces
(scene-spec JSON + `simulate` CLI for data, `.gcfs` files for weights),
which is also what makes the engine/trainer parity check a genuine
cross-implementation oracle.
"""

__version__ = "0.1.0"
