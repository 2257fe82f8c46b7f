"""Real-time multichannel speech enhancement for a binaural 4-mic array.

Library layout:

- :mod:`gcfsnet.dsp` -- streaming STFT analysis/synthesis and fractional delays
- :mod:`gcfsnet.audio` -- multichannel PCM buffers and WAV I/O
- :mod:`gcfsnet.engine` -- frame-processor contract, streaming driver, benchmarks
- :mod:`gcfsnet.geometry` -- array geometry, steering vectors, diffuse coherence
- :mod:`gcfsnet.adm` -- bilateral adaptive differential microphone baseline
- :mod:`gcfsnet.mvdr` -- fixed binaural MVDR beamformer baseline
- :mod:`gcfsnet.gcfs` -- deep filter-and-sum network (monaural/binaural variants)
- :mod:`gcfsnet.weights_io` -- quantized `.gcfs` weight container format
- :mod:`gcfsnet.scene` -- free-field 4-mic scene synthesis and SNR mixing
- :mod:`gcfsnet.signals` -- probe signal generators
- :mod:`gcfsnet.evaluation` -- SI-SDR/attenuation metrics, beam patterns, SNR sweeps
- :mod:`gcfsnet.cli` -- command-line front end
"""

__version__ = "0.1.0"
