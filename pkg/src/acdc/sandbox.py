"""Isolated execution of generated scoring programs.

Scoring code runs in a child Python process with CPU-time, wall-clock, and
address-space limits. Infrastructure failures (driver crash, timeout) are
reported as SandboxFailure; exceptions raised by the task code itself are
returned as a scorer error so callers can choose between "score 0" and
"reflect and repair" semantics.
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass

from .errors import SandboxFailure

_DRIVER = r"""
import json, sys, types

def _limit(cpu_s, mem_bytes):
    try:
        import resource
        resource.setrlimit(resource.RLIMIT_CPU, (cpu_s, cpu_s))
        resource.setrlimit(resource.RLIMIT_AS, (mem_bytes, mem_bytes))
    except Exception:
        pass

def _helper_module():
    mod = types.ModuleType("sandbox_eval_helper")

    def get_function_name_to_callable(func_string):
        namespace = {}
        try:
            exec(func_string, namespace)
        except Exception:
            return {}
        return {k: v for k, v in namespace.items() if callable(v) and not k.startswith("_")}

    def eval_with_llm_judge(instructions, submission, criteria=None):
        raise RuntimeError("LLM judge calls are not available inside the sandbox; "
                           "use an llm_judge scorer spec instead")

    mod.get_function_name_to_callable = get_function_name_to_callable
    mod.eval_with_llm_judge = eval_with_llm_judge
    sys.modules["sandbox_eval_helper"] = mod

def main():
    request = json.loads(sys.stdin.read())
    _limit(request.get("cpu_s", 5), request.get("mem_bytes", 512 * 1024 * 1024))
    _helper_module()
    namespace = {}
    try:
        exec(request["source"], namespace)
        family = namespace["TaskFamily"]
        tasks = family.get_tasks()
        t = tasks[request.get("task_key", "1")]
    except Exception as exc:
        print(json.dumps({"ok": True, "score": None,
                          "error": f"compile: {type(exc).__name__}: {exc}"}))
        return
    try:
        score = family.score(t, request["submission"])
    except Exception as exc:
        print(json.dumps({"ok": True, "score": None,
                          "error": f"runtime: {type(exc).__name__}: {exc}"}))
        return
    print(json.dumps({"ok": True, "score": score, "error": None}))

main()
"""


@dataclass
class SandboxResult:
    score: float | None
    error: str | None  # compile/runtime error text from the task code, if any


def run_task_family(source: str, submission: str, task_key: str = "1",
                    wall_clock_s: float = 10.0, cpu_s: int = 5,
                    memory_mb: int = 512) -> SandboxResult:
    """Execute TaskFamily.score(t, submission) for one task in a child process."""
    request = json.dumps({
        "source": source,
        "submission": submission,
        "task_key": task_key,
        "cpu_s": cpu_s,
        "mem_bytes": memory_mb * 1024 * 1024,
    })
    try:
        proc = subprocess.run(
            [sys.executable, "-I", "-c", _DRIVER],
            input=request.encode("utf-8"),
            capture_output=True,
            timeout=wall_clock_s,
        )
    except subprocess.TimeoutExpired:
        raise SandboxFailure(f"scorer exceeded wall clock limit of {wall_clock_s}s")
    except OSError as exc:
        raise SandboxFailure(f"could not launch sandbox process: {exc}")
    if proc.returncode != 0:
        raise SandboxFailure(
            f"sandbox process exited with {proc.returncode}: "
            f"{proc.stderr.decode('utf-8', 'replace')[-500:]}")
    try:
        payload = json.loads(proc.stdout.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise SandboxFailure(f"sandbox produced unreadable output: {exc}")
    score = payload.get("score")
    return SandboxResult(score=None if score is None else float(score),
                         error=payload.get("error"))
