import json
import os
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv()

# Debug flag: enable when running tests or when env var HYBRIDSEM_DEBUG is set
DEBUG = bool(os.getenv('HYBRIDSEM_DEBUG')) or ('unittest' in sys.modules) or ('PYTEST_CURRENT_TEST' in os.environ)

# Maintain per-run filename base so all writes go to the same timestamped file
_RUN_FILE_BASE: Dict[str, str] = {}


def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def log_root() -> str:
    """Root of the JSONL logs; HYBRIDSEM_LOG_DIR overrides <repo>/logs."""
    env = os.getenv("HYBRIDSEM_LOG_DIR")
    if env:
        return os.path.abspath(env)
    return os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", "logs"))


def _run_file_base_for(run_id: str) -> str:
    """Return a stable '<timestamp>_<run_id>' base for this process."""
    if run_id in _RUN_FILE_BASE:
        return _RUN_FILE_BASE[run_id]
    ts = datetime.now().strftime("%Y%m%d-%H%M%S")
    base = f"{ts}_{run_id}"
    _RUN_FILE_BASE[run_id] = base
    return base


def run_log_path(run_id: str) -> str:
    return os.path.join(log_root(), "runs", f"{_run_file_base_for(run_id)}.log")


def run_write(run_id: Optional[str], record: Dict[str, Any]) -> None:
    """Best-effort JSONL write for per-run logs.

    - `run_id` が未指定(None/空)なら即return。
    - 例外は全て握りつぶす（計算本体への影響を避ける）。
    """
    if not run_id:
        return
    try:
        path = run_log_path(run_id)
        _ensure_dir(os.path.dirname(path))
        rec = dict(record)
        rec.setdefault("ts", datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"))
        rec.setdefault("run_id", run_id)
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    except Exception:
        pass


def dbg(run_id: Optional[str], *args, **kwargs) -> None:
    """Debug helper: prints when DEBUG, always writes to the run log.

    - print: 環境変数/テスト時のみ
    - file: `run_write` へ `{"type":"debug","msg":...}` を出力（best-effort）
    """
    if DEBUG:
        print(*args, **kwargs)
    try:
        msg = " ".join(str(a) for a in args)
        run_write(run_id, {"type": "debug", "msg": msg})
    except Exception:
        pass
