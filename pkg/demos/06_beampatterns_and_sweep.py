"""Objective evaluation demo: beam patterns and a small SNR sweep.

Produces the attenuation-over-incidence-angle curves for all algorithms
(random weights for the deep models, so their patterns show structure, not
trained behavior) and a reduced SNR sweep. Writes CSVs plus a PNG into
demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gcfsnet.adm import AdmProcessor
from gcfsnet.engine import BypassProcessor
from gcfsnet.evaluation import SweepTemplate, beam_pattern, snr_sweep
from gcfsnet.gcfs import GcfsConfig, GcfsModel, GcfsProcessor
from gcfsnet.geometry import default_geometry
from gcfsnet.mvdr import MvdrProcessor
from gcfsnet.signals import speech_shaped_noise

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
geom = default_geometry()

probe = speech_shaped_noise(3 * 16000, np.random.default_rng(0))
angles = np.arange(-180, 181, 15)

mvdr = MvdrProcessor(geom)
gcfs_b = GcfsModel.random(GcfsConfig("binaural"), seed=1, scale=0.3)

factories = {
    "bypass": (BypassProcessor, 0.0),
    "adm": (AdmProcessor, 2.0),
    "mvdr": ((lambda: (mvdr.reset(), mvdr)[1]), 0.0),
    "gcfs-b (random)": ((lambda: GcfsProcessor(gcfs_b)), 0.0),
}

fig, ax = plt.subplots(figsize=(8, 5))
for name, (factory, adapt) in factories.items():
    pattern = beam_pattern(factory, probe, geom, angles=angles,
                           n_utterances=2, adapt_seconds=adapt)
    pattern.to_csv(OUT / f"beampattern_{name.split()[0]}.csv")
    ax.plot(pattern.angles, pattern.att_left_db, label=f"{name} (left)")
    print(f"{name:16s}: att at 0/90/180 deg = "
          f"{pattern.att_left_db[list(angles).index(0)]:6.1f} / "
          f"{pattern.att_left_db[list(angles).index(90)]:6.1f} / "
          f"{pattern.att_left_db[list(angles).index(180)]:6.1f} dB")
ax.set_xlabel("incidence angle (deg)")
ax.set_ylabel("attenuation (dB)")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "beampatterns.png", dpi=120)
print(f"\nwrote {OUT / 'beampatterns.png'}")

# small sweep: 4 SNRs x 3 sentences to keep the demo quick
report = snr_sweep(
    {
        "unprocessed": BypassProcessor,
        "mvdr": lambda: (mvdr.reset(), mvdr)[1],
        "adm": AdmProcessor,
    },
    SweepTemplate(probe_seconds=1.0),
    snrs=np.arange(-5.0, 10.5, 5.0),
    n_sentences=3,
    geom=geom,
)
report.to_csv(OUT / "sweep.csv")
print("\nmean better-ear SI-SDR over the grid:")
for name, value in report.aggregate.items():
    print(f"  {name:12s} {value:6.2f} dB")
print(f"wrote {OUT / 'sweep.csv'}")
