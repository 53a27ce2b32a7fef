"""モデルファイルのJSON Schemaを標準出力に書く"""

import json

from gdrf.config import RunConfig
from gdrf.schemas.model_file import ModelFile


def run(config: RunConfig) -> None:
    print(json.dumps(ModelFile.model_json_schema(), indent=2, ensure_ascii=False))
