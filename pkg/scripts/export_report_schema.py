import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.run_models import Report  # noqa: E402

SCHEMA_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "schemas", "report.schema.json")


def export_report_schema(path: str = SCHEMA_PATH) -> str:
    """Regenerate the shipped JSON schema of --format json reports"""
    schema = Report.model_json_schema(mode="serialization")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(schema, handle, indent=2, ensure_ascii=False)
        handle.write("\n")
    return path


if __name__ == "__main__":
    print(f"Schema written to {export_report_schema()}")
