"""
Export of analysis reports, coefficient tables and verdict tables.
"""
import json
from datetime import datetime
from typing import Dict

import pandas as pd

from . import __version__
from .analysis import AnalysisReport
from .series import BiSeries, write_biseries_csv


class ReportExporter:
    """
    Writes analysis reports (JSON or text), BiSeries coefficient CSVs and pandas tables.
    """

    def __init__(self):
        self.supported_formats = ['json', 'txt']

    def export_analysis(self, report: AnalysisReport, output_path: str, format_type: str = 'json') -> str:
        """
        Export an analysis report.

        Args:
            report: result of analyze()
            output_path: file path (extension added when missing)
            format_type: 'json' or 'txt'

        Returns:
            Path to exported file
        """
        if format_type not in self.supported_formats:
            raise ValueError(f"Unsupported format: {format_type}. Supported: {self.supported_formats}")
        data = self.prepare_report_data(report)
        if format_type == 'json':
            return self._export_json(data, output_path)
        return self._export_txt(data, output_path)

    def prepare_report_data(self, report: AnalysisReport) -> Dict:
        data = {
            'report_metadata': {
                'export_timestamp': datetime.now().isoformat(),
                'tool_version': __version__,
            },
        }
        data.update(report.to_dict())
        return data

    def _export_json(self, data: Dict, output_path: str) -> str:
        if not output_path.endswith('.json'):
            output_path += '.json'
        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        return output_path

    def _export_txt(self, data: Dict, output_path: str) -> str:
        if not output_path.endswith('.txt'):
            output_path += '.txt'
        indices = data['indices']
        conditions = data['conditions']
        lines = [
            "GEVREYKIT - FORMAL GEVREY INDEX REPORT",
            "=" * 60,
            "",
            f"Generated: {data['report_metadata']['export_timestamp']}",
            f"Tool Version: {data['report_metadata']['tool_version']}",
            f"Equation: {data['name']} (m = {data['m']}, type {data['equation_type']})",
            "",
            "NEWTON POLYGON",
            "-" * 30,
            f"Vertices: {data['polygon']['vertices']}",
            f"Slopes: {', '.join(data['polygon']['slopes']) or 'none'}",
            "",
            "CONDITIONS",
            "-" * 30,
            f"(N):  {conditions['N']['status']}",
            f"(GP): {conditions['GP']['status']} {conditions['GP']['detail']}".rstrip(),
            f"(R):  {'holds' if conditions['R'] else 'fails'}",
            "",
            "INDICES",
            "-" * 30,
            f"sigma0 = {indices['sigma0']}",
            f"s0     = {indices['s0']}",
            f"s1     = {indices['s1']}",
            f"Predicted class: {data['predicted_class']}",
        ]
        warnings = data['diagnostics']['warnings']
        if warnings:
            lines += ["", "WARNINGS", "-" * 30] + [f"  {w}" for w in warnings]
        with open(output_path, 'w', encoding='utf-8') as f:
            f.write("\n".join(lines) + "\n")
        return output_path

    def export_series(self, u: BiSeries, output_path: str) -> str:
        if not output_path.endswith('.csv'):
            output_path += '.csv'
        return write_biseries_csv(u, output_path)

    def export_table(self, table: pd.DataFrame, output_path: str) -> str:
        if not output_path.endswith('.csv'):
            output_path += '.csv'
        table.to_csv(output_path, index=False)
        return output_path
