"""
Corpus CLI Module
JSON-lines manifests, batch corpus expansion, single-file augmentation,
envelope analysis and the command line wrapped around them

Usage:
    python corpus_cli.py augment --manifest train.jsonl --out-dir aug/
    python corpus_cli.py single in.wav out.wav --seed 7
    python corpus_cli.py analyze vowel.wav --factors 0.9 0.9 1.1 --out-dir figs/
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv
from tqdm import tqdm

from augment_pipeline import DEFAULT_PRESET, WARP_PRESETS, AugmentConfig, LpcAugmenter, UtteranceSeed
from errors import (
    DuplicateEntryError,
    InvalidConfigError,
    LpcAugmentError,
    ManifestError,
    OutputDirectoryError,
)
from formant_analysis import analyze_formant_shift
from pole_warp import WarpPlan
from signal_core import load_wav, save_wav

logger = logging.getLogger(__name__)

OUT_DIR_ENV = 'LPCAUG_OUT_DIR'
OUTPUT_MANIFEST_NAME = 'augmented_manifest.jsonl'
DEFAULT_REPORT_NAME = 'batch_report.json'
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


# ----------------------------------------------------------------------------
# Manifests
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    """One manifest line: utterance id, audio path and optional transcript"""

    utterance_id: str
    path: str
    text: Optional[str] = None
    line_number: int = 0
    base_dir: str = ''

    def resolve(self) -> str:
        """Absolute audio path; relative paths are taken from the manifest's directory"""
        if os.path.isabs(self.path):
            return self.path
        return os.path.abspath(os.path.join(self.base_dir, self.path))

    def to_record(self, path: Optional[str] = None, utterance_id: Optional[str] = None) -> Dict:
        record = {'id': utterance_id or self.utterance_id, 'path': path or self.path}
        if self.text is not None:
            record['text'] = self.text
        return record


def _parse_line(raw: str, line_number: int, base_dir: str) -> ManifestEntry:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ManifestError(f"line {line_number}: invalid JSON ({e.msg})", [line_number]) from e

    if not isinstance(obj, dict):
        raise ManifestError(f"line {line_number}: expected a JSON object", [line_number])

    for key in ('id', 'path'):
        value = obj.get(key)
        if not isinstance(value, str) or not value:
            raise ManifestError(f"line {line_number}: missing or empty '{key}'", [line_number])

    if '/' in obj['id'] or '\\' in obj['id']:
        raise ManifestError(f"line {line_number}: id {obj['id']!r} cannot be used as a file name",
                            [line_number])

    text = obj.get('text')
    if text is not None and not isinstance(text, str):
        raise ManifestError(f"line {line_number}: 'text' must be a string", [line_number])

    return ManifestEntry(utterance_id=obj['id'], path=obj['path'], text=text,
                         line_number=line_number, base_dir=base_dir)


def read_manifest(path) -> List[ManifestEntry]:
    """
    Parse a JSON-lines manifest; blank lines are skipped
    Errors carry the 1-based line number(s) they refer to.
    """
    path = os.fspath(path)
    base_dir = os.path.dirname(os.path.abspath(path))

    entries: List[ManifestEntry] = []
    seen: Dict[str, int] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            entry = _parse_line(raw, line_number, base_dir)
            if entry.utterance_id in seen:
                first = seen[entry.utterance_id]
                raise DuplicateEntryError(
                    f"duplicate id {entry.utterance_id!r} on lines {first} and {line_number}",
                    [first, line_number]
                )
            seen[entry.utterance_id] = line_number
            entries.append(entry)

    return entries


def write_manifest(records: Sequence[Dict], path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n')


def copy_id(utterance_id: str, copy_index: int) -> str:
    return f"{utterance_id}_lpcaug{copy_index}"


# ----------------------------------------------------------------------------
# Batch expansion
# ----------------------------------------------------------------------------

@dataclass
class BatchReport:
    """Run summary; processed = successes + len(failures)"""

    processed: int = 0
    successes: int = 0
    passthrough_frames: int = 0
    clipped_utterances: int = 0
    failures: List[Tuple[str, str]] = field(default_factory=list)
    config_echo: Dict = field(default_factory=dict)
    copies: int = 0
    global_seed: int = 0
    files_written: int = 0
    output_manifest: Optional[str] = None
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        return {
            'processed': self.processed,
            'successes': self.successes,
            'passthrough_frames': self.passthrough_frames,
            'clipped_utterances': self.clipped_utterances,
            'failures': [{'id': uid, 'reason': reason} for uid, reason in self.failures],
            'config': self.config_echo,
            'copies': self.copies,
            'global_seed': self.global_seed,
            'files_written': self.files_written,
            'output_manifest': self.output_manifest,
            'elapsed': round(self.elapsed, 3),
        }

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)


def _prepare_out_dir(out_dir) -> str:
    out_dir = os.path.abspath(os.fspath(out_dir))
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OutputDirectoryError(f"Cannot create output directory {out_dir}: {e}") from e
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
        raise OutputDirectoryError(f"Output directory is not writable: {out_dir}")
    return out_dir


def _augment_entry(task: Tuple[ManifestEntry, AugmentConfig, int, int, str, bool]) -> Dict:
    """
    Worker body: every copy of one manifest entry
    Never raises; failures come back as an 'error' string.
    """
    entry, cfg, copies, global_seed, out_dir, dump_poles = task
    outcome = {'id': entry.utterance_id, 'written': [], 'passthrough_frames': 0,
               'clipped': 0, 'error': None}
    try:
        buffer = load_wav(entry.resolve())
        augmenter = LpcAugmenter(cfg)
        for n in range(1, copies + 1):
            seed = UtteranceSeed(global_seed, entry.utterance_id, n)
            result = augmenter.augment_utterance(buffer, seed=seed, collect_traces=dump_poles)

            name = copy_id(entry.utterance_id, n)
            save_wav(result.buffer, os.path.join(out_dir, f"{name}.wav"))
            if dump_poles:
                result.pole_dump().to_csv(os.path.join(out_dir, f"{name}_poles.csv"), index=False)

            outcome['written'].append(f"{name}.wav")
            outcome['passthrough_frames'] += result.passthrough_frames
            outcome['clipped'] += int(result.peak_limited)
    except Exception as e:
        outcome['error'] = f"{type(e).__name__}: {e}"
        _remove_copies(out_dir, outcome['written'])
        outcome.update(written=[], passthrough_frames=0, clipped=0)
    return outcome


def _remove_copies(out_dir: str, written: Sequence[str]):
    """An entry either has all its copies on disk or none"""
    for wav_name in written:
        stem = os.path.splitext(wav_name)[0]
        for name in (wav_name, f"{stem}_poles.csv"):
            path = os.path.join(out_dir, name)
            if os.path.exists(path):
                os.remove(path)
                logger.debug("Removed partial copy %s", path)


def batch_augment(entries: Sequence[ManifestEntry], cfg: AugmentConfig, copies: int = 2,
                  global_seed: int = 0, out_dir='.', workers: int = 1,
                  dump_poles: bool = False, progress: bool = True,
                  report_path=None) -> BatchReport:
    """
    Main function to expand a corpus
    Writes {id}_lpcaug{n}.wav for n = 1..copies, the output manifest and the
    JSON report. Per-entry failures are recorded and the run continues.
    """
    cfg.validate()
    if copies < 0:
        raise InvalidConfigError(f"copies must be >= 0, got {copies}")
    if workers < 1:
        raise InvalidConfigError(f"workers must be >= 1, got {workers}")

    out_dir = _prepare_out_dir(out_dir)
    started = time.monotonic()
    report = BatchReport(processed=len(entries), config_echo=cfg.to_dict(),
                         copies=copies, global_seed=global_seed)

    logger.info("Augmenting %d utterances x %d copies into %s", len(entries), copies, out_dir)

    outcomes: List[Optional[Dict]] = [None] * len(entries)
    if copies == 0:
        # Nothing to synthesise; audio is not even opened
        outcomes = [{'id': e.utterance_id, 'written': [], 'passthrough_frames': 0,
                     'clipped': 0, 'error': None} for e in entries]
    else:
        tasks = [(entry, cfg, copies, global_seed, out_dir, dump_poles) for entry in entries]
        pbar = tqdm(total=len(tasks), desc="LPC augment", disable=not progress)
        if workers == 1:
            for i, task in enumerate(tasks):
                outcomes[i] = _augment_entry(task)
                pbar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                futures = {ex.submit(_augment_entry, task): i for i, task in enumerate(tasks)}
                for fut in as_completed(futures):
                    outcomes[futures[fut]] = fut.result()
                    pbar.update(1)
        pbar.close()

    # Aggregate in manifest order so the output manifest is schedule-independent
    records = []
    for entry, outcome in zip(entries, outcomes):
        if outcome['error']:
            logger.warning("Failed %s: %s", entry.utterance_id, outcome['error'])
            report.failures.append((entry.utterance_id, outcome['error']))
            continue
        report.successes += 1
        report.passthrough_frames += outcome['passthrough_frames']
        report.clipped_utterances += outcome['clipped']
        report.files_written += len(outcome['written'])

        records.append(entry.to_record(path=entry.resolve()))
        for n, filename in enumerate(outcome['written'], start=1):
            records.append(entry.to_record(path=filename, utterance_id=copy_id(entry.utterance_id, n)))

    manifest_path = os.path.join(out_dir, OUTPUT_MANIFEST_NAME)
    write_manifest(records, manifest_path)
    report.output_manifest = manifest_path
    report.elapsed = time.monotonic() - started

    report_path = report_path or os.path.join(out_dir, DEFAULT_REPORT_NAME)
    report.write(report_path)

    logger.info("Done: %d ok, %d failed, %d files written in %.1fs",
                report.successes, len(report.failures), report.files_written, report.elapsed)
    return report


# ----------------------------------------------------------------------------
# Single file and analysis
# ----------------------------------------------------------------------------

def _utterance_id(path) -> str:
    return os.path.splitext(os.path.basename(os.fspath(path)))[0]


def augment_file(in_path, out_path, cfg: AugmentConfig, global_seed: int = 0,
                 forced_factors: Optional[Sequence[float]] = None,
                 dump_poles: bool = False) -> Dict:
    """
    One file in, one file out; the utterance id is the input file stem
    and the copy index is 1.
    """
    buffer = load_wav(in_path)
    augmenter = LpcAugmenter(cfg)
    order = cfg.order_for(buffer.sample_rate)

    if forced_factors:
        result = augmenter.augment_utterance(buffer, plan=WarpPlan.forced(forced_factors, order // 2),
                                             collect_traces=dump_poles)
    else:
        seed = UtteranceSeed(global_seed, _utterance_id(in_path), 1)
        result = augmenter.augment_utterance(buffer, seed=seed, collect_traces=dump_poles)

    save_wav(result.buffer, out_path)
    outputs = {'wav': os.fspath(out_path)}
    if dump_poles:
        outputs['poles'] = os.path.splitext(os.fspath(out_path))[0] + '_poles.csv'
        result.pole_dump().to_csv(outputs['poles'], index=False)

    logger.info("Wrote %s (%d/%d frames passed through)", out_path,
                result.passthrough_frames, result.total_frames)
    return {'result': result, 'outputs': outputs}


def analyze(path, cfg: AugmentConfig, forced_factors: Optional[Sequence[float]] = None,
            out_dir='.', global_seed: int = 0, frame_index: Optional[int] = None,
            n_bins: int = 512) -> Dict:
    """
    Pre/post-warp envelopes and the formant peak table for one frame
    (the highest-RMS frame by default), written as CSV plus an HTML chart
    """
    buffer = load_wav(path)
    order = cfg.order_for(buffer.sample_rate)
    stem = _utterance_id(path)

    if forced_factors:
        analysis = analyze_formant_shift(buffer, cfg, plan=WarpPlan.forced(forced_factors, order // 2),
                                         frame_index=frame_index, n_bins=n_bins)
    else:
        analysis = analyze_formant_shift(buffer, cfg, seed=UtteranceSeed(global_seed, stem, 1),
                                         frame_index=frame_index, n_bins=n_bins)

    out_dir = _prepare_out_dir(out_dir)
    outputs = {
        'envelope_before': os.path.join(out_dir, f"{stem}_envelope_before.csv"),
        'envelope_after': os.path.join(out_dir, f"{stem}_envelope_after.csv"),
        'formants': os.path.join(out_dir, f"{stem}_formants.csv"),
        'chart': os.path.join(out_dir, f"{stem}_envelope.html"),
    }
    analysis['before'].to_csv(outputs['envelope_before'])
    analysis['after'].to_csv(outputs['envelope_after'])
    analysis['peaks'].to_csv(outputs['formants'], index=False)
    analysis['chart'].write_html(outputs['chart'], include_plotlyjs='cdn')

    for name, out_path in outputs.items():
        logger.info("Wrote %s: %s", name, out_path)

    analysis['outputs'] = outputs
    return analysis


# ----------------------------------------------------------------------------
# Command line
# ----------------------------------------------------------------------------

class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run_cli owns the exit code"""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {number}")
    return number


def _non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {number}")
    return number


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument('--seed', type=int, default=0, help='global seed (default 0)')
    common.add_argument('--warp-preset', choices=sorted(WARP_PRESETS), default=DEFAULT_PRESET,
                        help=f'named warp range (default {DEFAULT_PRESET})')
    common.add_argument('--warp-lo', type=float, default=None, help='lower warp factor (default 0.8)')
    common.add_argument('--warp-hi', type=float, default=None, help='upper warp factor (default 1.2)')
    common.add_argument('--window-ms', type=float, default=20.0, help='analysis window (default 20)')
    common.add_argument('--hop-ms', type=float, default=10.0, help='hop size (default 10)')
    common.add_argument('--lpc-order', type=_positive_int, default=None,
                        help='override the order derived from the sample rate')
    common.add_argument('--energy-match', action='store_true',
                        help='rescale each frame to its input energy')
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = CliParser(prog='corpus_cli',
                       description='LPC formant-perturbation augmentation for speech corpora')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('augment', parents=[common], help='expand a JSON-lines manifest')
    p.add_argument('--manifest', required=True)
    p.add_argument('--out-dir', default=None, help=f'output directory (default ${OUT_DIR_ENV})')
    p.add_argument('--copies', type=_non_negative_int, default=2,
                   help='augmented copies per utterance (default 2, i.e. 3x data)')
    p.add_argument('--workers', type=_positive_int, default=1)
    p.add_argument('--dump-poles', action='store_true')
    p.add_argument('--report', default=None, help='JSON report path')
    p.add_argument('--no-progress', action='store_true')

    p = sub.add_parser('single', parents=[common], help='augment one WAV file')
    p.add_argument('input')
    p.add_argument('output')
    p.add_argument('--factors', type=float, nargs='+', default=None,
                   help='explicit warp factors instead of seeded draws')
    p.add_argument('--dump-poles', action='store_true')

    p = sub.add_parser('analyze', parents=[common], help='envelope and formant shift for one frame')
    p.add_argument('input')
    p.add_argument('--out-dir', default=None, help=f'output directory (default ${OUT_DIR_ENV} or .)')
    p.add_argument('--factors', type=float, nargs='+', default=None,
                   help='explicit warp factors instead of seeded draws')
    p.add_argument('--frame', type=int, default=None, help='frame index (default: highest RMS)')
    p.add_argument('--n-bins', type=int, default=512)

    return parser


def config_from_args(args) -> AugmentConfig:
    """Preset first, explicit --warp-lo/--warp-hi on top"""
    cfg = AugmentConfig(window_ms=args.window_ms, hop_ms=args.hop_ms,
                        energy_match=args.energy_match, lpc_order=args.lpc_order)
    cfg = cfg.with_preset(args.warp_preset)
    overrides = {}
    if args.warp_lo is not None:
        overrides['warp_lo'] = args.warp_lo
    if args.warp_hi is not None:
        overrides['warp_hi'] = args.warp_hi
    return dataclasses.replace(cfg, **overrides).validate()


def _run_command(args, cfg: AugmentConfig) -> int:
    if args.command == 'augment':
        out_dir = args.out_dir or os.getenv(OUT_DIR_ENV)
        if not out_dir:
            raise UsageError(f"augment needs --out-dir or ${OUT_DIR_ENV}")
        entries = read_manifest(args.manifest)
        report = batch_augment(entries, cfg, copies=args.copies, global_seed=args.seed,
                               out_dir=out_dir, workers=args.workers, dump_poles=args.dump_poles,
                               progress=not args.no_progress, report_path=args.report)
        return EXIT_OK if report.ok else EXIT_RUNTIME

    if args.command == 'single':
        augment_file(args.input, args.output, cfg, global_seed=args.seed,
                     forced_factors=args.factors, dump_poles=args.dump_poles)
        return EXIT_OK

    out_dir = args.out_dir or os.getenv(OUT_DIR_ENV) or '.'
    analysis = analyze(args.input, cfg, forced_factors=args.factors, out_dir=out_dir,
                       global_seed=args.seed, frame_index=args.frame, n_bins=args.n_bins)
    print(analysis['peaks'].to_string(index=False))
    return EXIT_OK


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main function for the command line
    Exit codes: 0 success, 1 usage error, 2 runtime failure
    """
    load_dotenv()
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, force=True)
        cfg = config_from_args(args)
        return _run_command(args, cfg)
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    except (UsageError, InvalidConfigError) as e:
        parser.print_usage(sys.stderr)
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (LpcAugmentError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(run_cli())
