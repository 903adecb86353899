# report_service.py
import json
from pathlib import Path
from typing import Any, Dict, List

from utils_helpers import write_json
from utils_logger import get_logger

logger = get_logger("report_service")

# lists longer than this are summarised in the text report
MAX_LIST_LINES = 40


def _safe_str(x):
    if x is None:
        return "Not Available"
    if isinstance(x, (dict, list)):
        try:
            return json.dumps(x, ensure_ascii=False, sort_keys=True)
        except (TypeError, ValueError):
            return str(x)
    return str(x)


def _render(value: Any, indent: int, lines: List[str]):
    pad = "  " * indent
    if isinstance(value, dict):
        for k in sorted(value):
            v = value[k]
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                _render(v, indent + 1, lines)
            else:
                lines.append(f"{pad}{k}: {_safe_str(v)}")
    elif isinstance(value, list):
        shown = value[:MAX_LIST_LINES]
        for item in shown:
            lines.append(f"{pad}- {_safe_str(item)}")
        if len(value) > len(shown):
            lines.append(f"{pad}... {len(value) - len(shown)} more")
    else:
        lines.append(f"{pad}{_safe_str(value)}")


# ---------------------------
# Plain text report generator
# ---------------------------
def build_text_report(command: str, payload: Dict[str, Any]) -> str:
    lines = [f"{command.upper()} REPORT", "=" * 60]
    verdict = payload.get("ok")
    if verdict is not None:
        lines.append(f"Verdict: {'PASS' if verdict else 'FAIL'}")
        lines.append("")
    _render({k: v for k, v in payload.items() if k != "ok"}, 0, lines)
    return "\n".join(lines) + "\n"


def write_reports(out_dir, command: str, payload: Dict[str, Any]) -> List[Path]:
    """<out>/<command>_report.json and <out>/<command>_report.txt."""
    out_dir = Path(out_dir)
    json_path = write_json(out_dir / f"{command}_report.json", payload)
    txt_path = out_dir / f"{command}_report.txt"
    txt_path.write_text(build_text_report(command, payload), encoding="utf-8")
    logger.info(f"reports written to {json_path} and {txt_path}")
    return [json_path, txt_path]
