import json
import os
import subprocess
import sys
from pathlib import Path

ADAPTER_SRC = Path(__file__).resolve().parents[1] / "src"
ENGINE_SRC = Path(__file__).resolve().parents[2] / "src"


def adapter_command(*args):
    return [sys.executable, "-m", "embed_adapter", *args]


def adapter_env():
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(
        [str(ADAPTER_SRC)] + ([env["PYTHONPATH"]] if env.get("PYTHONPATH") else [])
    )
    return env


class AdapterSession:
    """Drive an adapter subprocess line by line."""

    def __init__(self, *args):
        self.proc = subprocess.Popen(
            adapter_command(*args),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=adapter_env(),
            text=True,
            bufsize=1,
        )

    def send_line(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def send(self, payload: dict) -> None:
        self.send_line(json.dumps(payload))

    def read(self) -> dict:
        line = self.proc.stdout.readline()
        assert line, "adapter closed its output stream"
        return json.loads(line)

    def ask(self, payload: dict) -> dict:
        self.send(payload)
        return self.read()

    def close(self) -> int:
        self.proc.stdin.close()
        self.proc.wait(timeout=10)
        return self.proc.returncode

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)
