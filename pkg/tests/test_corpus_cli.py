"""
Tests for manifests, batch expansion, analysis output and the CLI
"""

import filecmp
import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd

from augment_pipeline import AugmentConfig
from corpus_cli import (
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    OUT_DIR_ENV,
    OUTPUT_MANIFEST_NAME,
    analyze,
    batch_augment,
    read_manifest,
    run_cli,
)
from errors import (
    AudioWriteError,
    DuplicateEntryError,
    ManifestError,
    NoVoicedFrameError,
    OutputDirectoryError,
)
from formant_analysis import synthetic_vowel
from signal_core import AudioBuffer, load_wav, save_wav
from tests.helpers import write_jsonl, write_vowels


class TempDirTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, *parts):
        return os.path.join(self.dir, *parts)

    def write_manifest_for(self, wav_paths, name='manifest.jsonl'):
        lines = [json.dumps({'id': os.path.splitext(os.path.basename(p))[0], 'path': p,
                             'text': f'utterance, number {i}'})
                 for i, p in enumerate(wav_paths)]
        write_jsonl(self.path(name), lines)
        return self.path(name)


class TestReadManifest(TempDirTestCase):

    def test_two_valid_lines_in_order(self):
        write_jsonl(self.path('m.jsonl'), [
            '{"id": "b", "path": "/data/b.wav", "text": "hello, world"}',
            '',
            '{"id": "a", "path": "a.wav"}',
        ])
        entries = read_manifest(self.path('m.jsonl'))
        self.assertEqual([e.utterance_id for e in entries], ['b', 'a'])
        self.assertEqual(entries[0].text, 'hello, world')
        self.assertIsNone(entries[1].text)
        self.assertEqual(entries[1].line_number, 3)

    def test_relative_paths_resolve_against_manifest_dir(self):
        os.makedirs(self.path('sub'))
        write_jsonl(self.path('sub', 'm.jsonl'), ['{"id": "a", "path": "audio/a.wav"}'])
        entry = read_manifest(self.path('sub', 'm.jsonl'))[0]
        self.assertEqual(entry.resolve(), os.path.abspath(self.path('sub', 'audio', 'a.wav')))

    def test_missing_path_cites_line(self):
        write_jsonl(self.path('m.jsonl'), ['{"id": "a", "path": "a.wav"}', '{"id": "b"}'])
        with self.assertRaises(ManifestError) as ctx:
            read_manifest(self.path('m.jsonl'))
        self.assertEqual(ctx.exception.line_numbers, (2,))
        self.assertIn('line 2', str(ctx.exception))

    def test_invalid_json_cites_line(self):
        write_jsonl(self.path('m.jsonl'), ['{"id": "a", "path": "a.wav"', ])
        with self.assertRaises(ManifestError) as ctx:
            read_manifest(self.path('m.jsonl'))
        self.assertEqual(ctx.exception.line_numbers, (1,))

    def test_duplicate_cites_both_lines(self):
        lines = [json.dumps({'id': f'u{i}', 'path': f'{i}.wav'}) for i in range(1, 8)]
        lines[6] = json.dumps({'id': 'u3', 'path': 'again.wav'})
        write_jsonl(self.path('m.jsonl'), lines)
        with self.assertRaises(DuplicateEntryError) as ctx:
            read_manifest(self.path('m.jsonl'))
        self.assertEqual(ctx.exception.line_numbers, (3, 7))
        self.assertIn('3', str(ctx.exception))
        self.assertIn('7', str(ctx.exception))


class TestBatchAugment(TempDirTestCase):

    def test_ten_entries_two_copies_deterministic_across_workers(self):
        wavs = write_vowels(self.dir, 10)
        entries = read_manifest(self.write_manifest_for(wavs))
        cfg = AugmentConfig()

        runs = {}
        for name, workers in (('serial', 1), ('again', 1), ('pool', 8)):
            out_dir = self.path(name)
            report = batch_augment(entries, cfg, copies=2, global_seed=7, out_dir=out_dir,
                                   workers=workers, progress=False)
            self.assertEqual(report.processed, 10)
            self.assertEqual(report.successes, 10)
            self.assertEqual(report.failures, [])
            self.assertEqual(report.files_written, 20)
            runs[name] = out_dir

        names = sorted(f for f in os.listdir(runs['serial']) if f.endswith('.wav'))
        self.assertEqual(len(names), 20)
        self.assertIn('utt00_lpcaug1.wav', names)
        self.assertIn('utt09_lpcaug2.wav', names)

        for other in ('again', 'pool'):
            self.assertEqual(sorted(f for f in os.listdir(runs[other]) if f.endswith('.wav')), names)
            for name in names + [OUTPUT_MANIFEST_NAME]:
                self.assertTrue(filecmp.cmp(os.path.join(runs['serial'], name),
                                            os.path.join(runs[other], name), shallow=False),
                                f"{other}/{name} differs")

        out_entries = read_manifest(os.path.join(runs['serial'], OUTPUT_MANIFEST_NAME))
        self.assertEqual(len(out_entries), 30)
        self.assertEqual([e.utterance_id for e in out_entries[:3]],
                         ['utt00', 'utt00_lpcaug1', 'utt00_lpcaug2'])
        self.assertEqual(out_entries[1].text, 'utterance, number 0')
        for entry in out_entries:
            self.assertTrue(os.path.exists(entry.resolve()), entry.path)

        with open(os.path.join(runs['serial'], 'batch_report.json')) as f:
            saved = json.load(f)
        self.assertEqual(saved['processed'], 10)
        self.assertEqual(saved['config']['warp_lo'], 0.8)

    def test_copies_zero_keeps_input_manifest(self):
        wavs = write_vowels(self.dir, 3, duration_s=0.2)
        entries = read_manifest(self.write_manifest_for(wavs))
        report = batch_augment(entries, AugmentConfig(), copies=0, out_dir=self.path('out'), progress=False)

        self.assertEqual(report.files_written, 0)
        self.assertFalse([f for f in os.listdir(self.path('out')) if f.endswith('.wav')])
        out_entries = read_manifest(self.path('out', OUTPUT_MANIFEST_NAME))
        self.assertEqual([(e.utterance_id, e.resolve(), e.text) for e in out_entries],
                         [(e.utterance_id, e.resolve(), e.text) for e in entries])

    def test_one_unreadable_input_is_recorded(self):
        wavs = write_vowels(self.dir, 4, duration_s=0.3)
        entries = read_manifest(self.write_manifest_for(wavs + [self.path('missing.wav')]))
        report = batch_augment(entries, AugmentConfig(), copies=2, out_dir=self.path('out'), progress=False)

        self.assertEqual(report.processed, 5)
        self.assertEqual(report.successes, 4)
        self.assertEqual(len(report.failures), 1)
        self.assertEqual(report.failures[0][0], 'missing')
        self.assertIn('AudioFileMissingError', report.failures[0][1])
        self.assertEqual(len([f for f in os.listdir(self.path('out')) if f.endswith('.wav')]), 8)
        self.assertEqual(len(read_manifest(self.path('out', OUTPUT_MANIFEST_NAME))), 12)

    def test_pole_dumps_written(self):
        wavs = write_vowels(self.dir, 1, duration_s=0.3)
        entries = read_manifest(self.write_manifest_for(wavs))
        batch_augment(entries, AugmentConfig(), copies=1, out_dir=self.path('out'),
                      dump_poles=True, progress=False)
        dump = pd.read_csv(self.path('out', 'utt00_lpcaug1_poles.csv'))
        self.assertEqual(list(dump.columns)[:5],
                         ['frame_index', 'pair_index', 'magnitude', 'phase_before', 'phase_after'])
        self.assertTrue(np.allclose(dump['magnitude'], dump['magnitude_after']))

    def test_failed_second_copy_removes_the_first(self):
        wavs = write_vowels(self.dir, 1, duration_s=0.3)
        entries = read_manifest(self.write_manifest_for(wavs))
        calls = []

        def save_then_fail(buffer, path):
            calls.append(path)
            if len(calls) > 1:
                raise AudioWriteError(f"disk full writing {path}")
            save_wav(buffer, path)

        with patch('corpus_cli.save_wav', side_effect=save_then_fail):
            report = batch_augment(entries, AugmentConfig(), copies=2, out_dir=self.path('out'),
                                   workers=1, dump_poles=True, progress=False)

        self.assertEqual(len(calls), 2)
        self.assertEqual(report.successes, 0)
        self.assertEqual(len(report.failures), 1)
        self.assertIn('AudioWriteError', report.failures[0][1])
        self.assertEqual(report.files_written, 0)
        self.assertFalse([f for f in os.listdir(self.path('out')) if f.startswith('utt00_lpcaug')])

    def test_unwritable_out_dir(self):
        open(self.path('a_file'), 'w').close()
        with self.assertRaises(OutputDirectoryError):
            batch_augment([], AugmentConfig(), out_dir=self.path('a_file'), progress=False)


class TestAnalyze(TempDirTestCase):

    def test_writes_tables_and_chart(self):
        save_wav(synthetic_vowel(16000, 1.0), self.path('vowel.wav'))
        analysis = analyze(self.path('vowel.wav'), AugmentConfig(), forced_factors=[0.9, 0.9, 1.1],
                           out_dir=self.path('figs'))

        for key in ('envelope_before', 'envelope_after', 'formants', 'chart'):
            self.assertTrue(os.path.exists(analysis['outputs'][key]), key)
        self.assertTrue(analysis['outputs']['chart'].endswith('vowel_envelope.html'))

        table = pd.read_csv(analysis['outputs']['formants'])
        self.assertEqual(list(table.columns), ['peak_index', 'freq_before_hz', 'freq_after_hz', 'shift_hz'])
        envelope = pd.read_csv(analysis['outputs']['envelope_before'])
        self.assertEqual(len(envelope), 512)

    def test_silent_file(self):
        save_wav(AudioBuffer(np.zeros(8000), 16000), self.path('silence.wav'))
        with self.assertRaises(NoVoicedFrameError):
            analyze(self.path('silence.wav'), AugmentConfig(), out_dir=self.path('figs'))


class TestRunCli(TempDirTestCase):

    def setUp(self):
        super().setUp()
        save_wav(synthetic_vowel(16000, 0.5, seed=2), self.path('in.wav'))

    def test_single_is_deterministic(self):
        for name in ('a.wav', 'b.wav'):
            status = run_cli(['single', self.path('in.wav'), self.path(name), '--seed', '7',
                              '--log-level', 'WARNING'])
            self.assertEqual(status, EXIT_OK)
        self.assertTrue(filecmp.cmp(self.path('a.wav'), self.path('b.wav'), shallow=False))
        self.assertEqual(len(load_wav(self.path('a.wav'))), 8000)

    def test_single_with_forced_factors(self):
        status = run_cli(['single', self.path('in.wav'), self.path('f.wav'),
                          '--factors', '1.1', '--dump-poles', '--log-level', 'WARNING'])
        self.assertEqual(status, EXIT_OK)
        dump = pd.read_csv(self.path('f_poles.csv'))
        self.assertTrue(np.allclose(dump['factor'], 1.1))

    def test_inverted_warp_range_is_usage_error(self):
        status = run_cli(['single', self.path('in.wav'), self.path('o.wav'),
                          '--warp-lo', '1.3', '--warp-hi', '1.1'])
        self.assertEqual(status, EXIT_USAGE)
        self.assertFalse(os.path.exists(self.path('o.wav')))

    def test_unknown_flag_is_usage_error(self):
        self.assertEqual(run_cli(['single', 'a.wav', 'b.wav', '--bogus']), EXIT_USAGE)
        self.assertEqual(run_cli([]), EXIT_USAGE)

    def test_augment_defaults(self):
        manifest = self.write_manifest_for([self.path('in.wav')])
        status = run_cli(['augment', '--manifest', manifest, '--out-dir', self.path('out'),
                          '--no-progress', '--log-level', 'WARNING'])
        self.assertEqual(status, EXIT_OK)
        with open(self.path('out', 'batch_report.json')) as f:
            report = json.load(f)
        self.assertEqual(report['copies'], 2)
        self.assertEqual(report['global_seed'], 0)
        self.assertEqual((report['config']['warp_lo'], report['config']['warp_hi']), (0.8, 1.2))
        self.assertEqual(report['config']['window_ms'], 20.0)

    def test_out_dir_from_environment(self):
        manifest = self.write_manifest_for([self.path('in.wav')])
        with patch.dict(os.environ, {OUT_DIR_ENV: self.path('env_out')}):
            status = run_cli(['augment', '--manifest', manifest, '--copies', '1',
                              '--report', self.path('r.json'), '--no-progress'])
        self.assertEqual(status, EXIT_OK)
        self.assertTrue(os.path.exists(self.path('env_out', 'in_lpcaug1.wav')))
        self.assertTrue(os.path.exists(self.path('r.json')))

    def test_failures_exit_with_runtime_status(self):
        manifest = self.write_manifest_for([self.path('in.wav'), self.path('gone.wav')])
        status = run_cli(['augment', '--manifest', manifest, '--out-dir', self.path('out'),
                          '--copies', '1', '--no-progress', '--log-level', 'ERROR'])
        self.assertEqual(status, EXIT_RUNTIME)
        with open(self.path('out', 'batch_report.json')) as f:
            self.assertEqual(len(json.load(f)['failures']), 1)

    def test_bad_manifest_is_runtime_failure(self):
        write_jsonl(self.path('bad.jsonl'), ['not json'])
        status = run_cli(['augment', '--manifest', self.path('bad.jsonl'), '--out-dir', self.path('out'),
                          '--log-level', 'ERROR'])
        self.assertEqual(status, EXIT_RUNTIME)

    def test_analyze_command(self):
        status = run_cli(['analyze', self.path('in.wav'), '--out-dir', self.path('figs'),
                          '--factors', '0.9', '0.9', '1.1', '--log-level', 'WARNING'])
        self.assertEqual(status, EXIT_OK)
        self.assertTrue(os.path.exists(self.path('figs', 'in_formants.csv')))


if __name__ == '__main__':
    unittest.main()
