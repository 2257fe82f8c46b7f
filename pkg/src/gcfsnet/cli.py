"""Command-line front end.

Subcommands: enhance (WAV in -> 2-channel WAV out), simulate (scene spec ->
mixture and reference WAVs), beampattern (attenuation vs angle CSV), sweep
(SNR grid CSV) and bench (real-time-factor report). Exit codes: 0 success,
1 usage error, 2 I/O error, 3 config/weights error. All randomness is
seeded, so every invocation is reproducible from its flags.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .adm import AdmConfig, AdmProcessor
from .audio import MultichannelAudio, read_wav, write_wav
from .engine import BypassProcessor, FrameProcessor, GainProcessor, measure_rtf, process_stream
from .evaluation import SweepTemplate, beam_pattern, snr_sweep
from .gcfs import GcfsConfig, GcfsModel, GcfsProcessor
from .geometry import default_geometry
from .scene import mix_scene, scene_spec_from_json
from .signals import speech_shaped_noise
from .weights_io import ContainerFormatError, load_container

ALGORITHMS = ("bypass", "gain", "adm", "mvdr", "gcfs-m", "gcfs-b")
ENGINE_RATE = 16000

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CONFIG = 3


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exceptions, not exit(2)."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="gcfsnet",
                     description="Binaural 4-mic speech enhancement toolbox")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_geometry(p):
        p.add_argument("--mic-spacing", type=float, default=0.011,
                       help="front/back mic distance per device in m (default 0.011)")
        p.add_argument("--head-width", type=float, default=0.15,
                       help="distance between the devices in m (default 0.15)")

    def add_algo(p, multiple=False):
        if multiple:
            p.add_argument("--algos", required=True,
                           help="comma-separated list from: " + ", ".join(ALGORITHMS))
        else:
            p.add_argument("--algo", required=True, choices=ALGORITHMS)
        p.add_argument("--weights", help="path to a .gcfs weight container "
                                         "(required for gcfs-m / gcfs-b)")
        p.add_argument("--gain-db", type=float, default=0.0,
                       help="gain for the 'gain' algorithm (default 0)")

    p = sub.add_parser("enhance", help="process a 4-channel WAV into a 2-channel WAV")
    add_algo(p)
    add_geometry(p)
    p.add_argument("--in", dest="input", required=True, help="input WAV (16 kHz)")
    p.add_argument("--out", dest="output", required=True, help="output WAV")

    p = sub.add_parser("simulate", help="render a scene spec to mixture/reference WAVs")
    add_geometry(p)
    p.add_argument("--spec", required=True, help="scene description (JSON)")
    p.add_argument("--out-mix", required=True, help="4-channel mixture WAV")
    p.add_argument("--out-ref", required=True, help="2-channel clean target reference WAV")
    p.add_argument("--out-noise", help="optional 4-channel noise reference WAV")
    p.add_argument("--seed", type=int, help="override the spec's seed")

    p = sub.add_parser("beampattern", help="attenuation over incidence angle to CSV")
    add_algo(p)
    add_geometry(p)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--probe-seconds", type=float, default=3.0)
    p.add_argument("--n-utterances", type=int, default=4)
    p.add_argument("--angle-step", type=int, default=5)
    p.add_argument("--adapt-seconds", type=float, default=None,
                   help="adaptation time excluded from measurement "
                        "(default 2 s for adm, 0 otherwise)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sweep", help="SNR sweep with per-algorithm metrics to CSV")
    add_algo(p, multiple=True)
    add_geometry(p)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--n-sentences", type=int, default=20)
    p.add_argument("--snr-min", type=float, default=-5.0)
    p.add_argument("--snr-max", type=float, default=10.0)
    p.add_argument("--snr-step", type=float, default=1.0)
    p.add_argument("--probe-seconds", type=float, default=2.0)
    p.add_argument("--diffuse-level", type=float, default=None,
                   help="add a diffuse noise bed at this level in dB")
    p.add_argument("--seed", type=int, default=1000)

    p = sub.add_parser("bench", help="real-time factor benchmark")
    add_algo(p)
    add_geometry(p)
    p.add_argument("--seconds", type=float, default=30.0)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _load_gcfs_model(algo: str, weights_path: str | None,
                     allow_random: bool) -> GcfsModel:
    variant = "monaural" if algo == "gcfs-m" else "binaural"
    if weights_path is None:
        if not allow_random:
            raise UsageError(f"--weights is required for --algo {algo}")
        print(f"note: no --weights given, using random {variant} weights (seed 0)",
              file=sys.stderr)
        return GcfsModel.random(GcfsConfig(variant=variant), seed=0, scale=0.3)
    container = load_container(weights_path)
    if container.config.variant != variant:
        raise ConfigError(
            f"weight container is {container.config.variant} but --algo {algo} "
            f"needs a {variant} model"
        )
    return GcfsModel.from_container(container)


def make_processor(algo: str, args, allow_random_weights: bool = False) -> FrameProcessor:
    geom = default_geometry(args.mic_spacing, args.head_width)
    if algo == "bypass":
        return BypassProcessor()
    if algo == "gain":
        return GainProcessor(args.gain_db)
    if algo == "adm":
        return AdmProcessor(AdmConfig(mic_spacing=args.mic_spacing))
    if algo == "mvdr":
        from .mvdr import MvdrProcessor

        return MvdrProcessor(geom)
    if algo in ("gcfs-m", "gcfs-b"):
        model = _load_gcfs_model(algo, args.weights, allow_random_weights)
        return GcfsProcessor(model)
    raise UsageError(f"unknown algorithm {algo!r}")


def _read_engine_wav(path, n_channels: int) -> MultichannelAudio:
    # wrong format is an input-data problem: exit code 2, not 3
    audio = read_wav(path)
    if audio.sample_rate != ENGINE_RATE:
        raise ValueError(f"expected {ENGINE_RATE} Hz input, got {audio.sample_rate} Hz")
    if audio.channels != n_channels:
        raise ValueError(f"expected {n_channels} channels, got {audio.channels}")
    return audio


def cmd_enhance(args) -> int:
    proc = make_processor(args.algo, args)
    audio = _read_engine_wav(args.input, proc.n_in_channels)
    out = process_stream(proc, audio)
    write_wav(args.output, out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = scene_spec_from_json(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    geom = default_geometry(args.mic_spacing, args.head_width)
    scene = mix_scene(spec, geom)
    write_wav(args.out_mix, scene.mixture)
    write_wav(args.out_ref, scene.target_ref)
    if args.out_noise:
        write_wav(args.out_noise, scene.noise_ref)
    return EXIT_OK


def cmd_beampattern(args) -> int:
    geom = default_geometry(args.mic_spacing, args.head_width)
    probe = speech_shaped_noise(int(args.probe_seconds * ENGINE_RATE),
                                np.random.default_rng(args.seed))
    adapt = args.adapt_seconds
    if adapt is None:
        adapt = 2.0 if args.algo == "adm" else 0.0
    if adapt > 0 and args.probe_seconds <= adapt + 0.5:
        raise UsageError("--probe-seconds must exceed --adapt-seconds by >= 0.5 s")
    angles = np.arange(-180, 181, args.angle_step)
    pattern = beam_pattern(
        lambda: make_processor(args.algo, args, allow_random_weights=True),
        probe, geom, angles=angles, n_utterances=args.n_utterances,
        adapt_seconds=adapt,
    )
    pattern.to_csv(args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    geom = default_geometry(args.mic_spacing, args.head_width)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algos:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r} in --algos")
    procs = {
        a: (lambda a=a: make_processor(a, args, allow_random_weights=True))
        for a in algos
    }
    # fail early on bad weights instead of inside the grid
    for factory in procs.values():
        factory()
    template = SweepTemplate(probe_seconds=args.probe_seconds,
                             diffuse_level=args.diffuse_level, base_seed=args.seed)
    snrs = np.arange(args.snr_min, args.snr_max + args.snr_step / 2, args.snr_step)
    report = snr_sweep(procs, template, snrs=snrs, n_sentences=args.n_sentences,
                       geom=geom)
    report.to_csv(args.out)
    for name, value in report.aggregate.items():
        print(f"{name}: mean better-ear SI-SDR {value:.2f} dB")
    return EXIT_OK


def cmd_bench(args) -> int:
    proc = make_processor(args.algo, args, allow_random_weights=True)
    rng = np.random.default_rng(args.seed)
    audio = MultichannelAudio(
        ENGINE_RATE,
        0.1 * rng.standard_normal((proc.n_in_channels, int(args.seconds * ENGINE_RATE))),
    )
    report = measure_rtf(proc, audio, repetitions=args.repetitions)
    print(f"algorithm:        {args.algo}")
    print(f"audio seconds:    {report.audio_seconds:.2f}")
    print(f"wall seconds:     {report.wall_seconds:.3f}")
    print(f"real-time factor: {report.rtf:.4f}")
    print(f"per-frame p50/p95/p99: {report.per_frame_p50_us:.0f} / "
          f"{report.per_frame_p95_us:.0f} / {report.per_frame_p99_us:.0f} us")
    print(f"deadline misses (>2 ms): {report.deadline_misses}")
    print(f"machine:          {report.machine}")
    return EXIT_OK


COMMANDS = {
    "enhance": cmd_enhance,
    "simulate": cmd_simulate,
    "beampattern": cmd_beampattern,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContainerFormatError as exc:
        print(f"weights error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, ValueError, KeyError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli())
