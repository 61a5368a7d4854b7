from typing import Dict, Sequence

import numpy as np

from wdmd_sysid.domain.models import ExperimentConfig
from wdmd_sysid.infrastructure.csv_adapter import save_vector, write_table
from wdmd_sysid.infrastructure.json_adapter import build_provenance, write_json
from wdmd_sysid.infrastructure.yaml_config import config_to_dict


class FileReportStore:
    """CSV tables and vectors, JSON documents, all written to local files."""

    def write_table(self, output_path: str, header: Sequence[str], rows) -> None:
        write_table(output_path, header, rows)

    def write_vector(self, output_path: str, values: np.ndarray) -> None:
        save_vector(output_path, values)

    def write_document(self, data: Dict, output_path: str) -> None:
        write_json(data, output_path)

    def describe(self, experiment: ExperimentConfig) -> Dict:
        return config_to_dict(experiment)

    def provenance(self, experiment: ExperimentConfig) -> Dict[str, str]:
        return build_provenance(self.describe(experiment))
