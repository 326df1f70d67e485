"""Request loop: line-delimited JSON in, SGLT files + JSON replies out.

One request per line: ``{"id", "image_path", "scale": [w, h], "flip"}``.
Each success reply names the SGLT file written for that request:
``{"id", "logit_path"}``. Failures reply ``{"id", "error"}`` and the loop
keeps serving, so one bad request never kills the session. Replies are
emitted in completion order, which for this single-threaded loop is
request order.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

_ID_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def _reply(stream, **fields) -> None:
    stream.write(json.dumps(fields) + "\n")
    stream.flush()


def serve(model, workdir: str | Path, stdin=None, stdout=None) -> int:
    """Serve requests until the input stream closes; returns served count."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    from .sglt import write_sglt

    seen: set[str] = set()
    served = 0
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            req_id = str(req["id"])
            image_path = str(req["image_path"])
            scale = (int(req["scale"][0]), int(req["scale"][1]))
            flip = bool(req["flip"])
        except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as e:
            _reply(stdout, id=None, error=f"malformed request: {e}")
            continue
        if req_id in seen:
            _reply(stdout, id=req_id, error=f"duplicate request id {req_id!r}")
            continue
        seen.add(req_id)
        if scale[0] <= 0 or scale[1] <= 0:
            _reply(stdout, id=req_id, error=f"bad scale {scale}")
            continue
        try:
            logits = model(image_path, scale, flip)
            out_path = workdir / (_ID_SAFE.sub("_", req_id) + ".sglt")
            write_sglt(out_path, logits)
        except Exception as e:  # keep serving after any model failure
            _reply(stdout, id=req_id, error=str(e))
            continue
        _reply(stdout, id=req_id, logit_path=str(out_path))
        served += 1
    return served
