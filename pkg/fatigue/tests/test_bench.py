import json
from dataclasses import replace

from django.test import SimpleTestCase

from fatigue import bench
from fatigue.config import ModelConfig
from fatigue.errors import FormatError, InputError
from fatigue.network import count_parameters

TINY = ModelConfig(N=5, D=4, c=2, R=3, k=2, dilations=(1, 2), H=3, M=3, S=8)


class RunBenchmarkTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.report = bench.run_benchmark(TINY, batch_size=2, iterations=3, warmup=1)

    def test_report_fields(self):
        report = self.report
        self.assertEqual(report.param_count, count_parameters(TINY))
        self.assertEqual(report.throughput_samples_per_sec, 2 / report.forward_sec_per_batch)
        self.assertGreater(report.forward_sec_per_batch, 0.0)
        self.assertGreater(report.backward_sec_per_batch, 0.0)
        self.assertEqual((report.batch_size, report.iterations, report.warmup), (2, 3, 1))

    def test_injected_delay_shows_in_forward_time(self):
        base = bench.run_benchmark(TINY, iterations=5, warmup=1)
        slow = bench.run_benchmark(TINY, iterations=5, warmup=1, delay=0.01)
        self.assertGreaterEqual(slow.forward_sec_per_batch, 0.01)
        self.assertGreaterEqual(slow.forward_sec_per_batch - base.forward_sec_per_batch, 0.009)

    def test_ablations_shrink_the_model(self):
        report = bench.run_benchmark(replace(TINY, use_gcn=False), iterations=1, warmup=0)
        self.assertLess(report.param_count, self.report.param_count)

    def test_argument_checks(self):
        for kwargs in ({'iterations': 0}, {'batch_size': 0}, {'warmup': -1}):
            with self.subTest(**kwargs), self.assertRaises(InputError):
                bench.run_benchmark(TINY, **kwargs)


class ReportRenderingTests(SimpleTestCase):

    def setUp(self):
        self.report = bench.BenchReport(
            config=TINY, param_count=1234, forward_sec_per_batch=0.0025,
            backward_sec_per_batch=0.004, throughput_samples_per_sec=400.0,
            peak_memory_mb=88.5, batch_size=1, iterations=10, warmup=3,
        )

    def test_json_reads_back(self):
        text = bench.render_report(self.report, 'json')
        self.assertEqual(bench.parse_report(text), self.report)

    def test_json_field_order(self):
        payload = json.loads(bench.render_report(self.report, 'json'))
        self.assertEqual(list(payload), [
            'config', 'param_count', 'forward_sec_per_batch', 'backward_sec_per_batch',
            'throughput_samples_per_sec', 'peak_memory_mb', 'batch_size', 'iterations', 'warmup',
        ])
        self.assertEqual(payload['config']['dilations'], [1, 2])

    def test_absent_memory(self):
        report = replace(self.report, peak_memory_mb=None)
        self.assertIsNone(json.loads(bench.render_report(report, 'json'))['peak_memory_mb'])
        self.assertIsNone(bench.parse_report(bench.render_report(report, 'json')).peak_memory_mb)
        row = bench.render_report(report, 'table').splitlines()[1]
        self.assertEqual(row.split()[-1], '-')

    def test_table(self):
        header, row, footer = bench.render_report(self.report, 'table').splitlines()
        self.assertEqual(header.split(), list(bench.TABLE_COLUMNS))
        self.assertEqual(row.split(), ['1.23E+03', '0.0025', '0.004', '400', '88.5'])
        self.assertIn('params=1234', footer)

    def test_unknown_format(self):
        with self.assertRaises(InputError):
            bench.render_report(self.report, 'csv')

    def test_bad_report_text(self):
        with self.assertRaises(FormatError):
            bench.parse_report('not json')
        with self.assertRaises(FormatError):
            bench.parse_report('{"param_count": 3}')
