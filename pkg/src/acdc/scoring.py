"""Backend-neutral scorer specifications and the binary score dispatcher."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from . import sandbox
from .genome import ModelGenome

logger = logging.getLogger(__name__)

SCORER_KINDS = ("exact_match", "numeric_tolerance", "function_tests",
                "llm_judge", "synthetic_probe")


@dataclass
class ScorerSpec:
    kind: str
    payload: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in SCORER_KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        required = {
            "exact_match": ("expected",),
            "numeric_tolerance": ("expected", "tol"),
            "function_tests": ("source",),
            "llm_judge": ("criteria",),
            "synthetic_probe": ("direction", "threshold"),
        }[self.kind]
        for key in required:
            if key not in self.payload:
                raise ValueError(f"{self.kind} scorer payload missing {key!r}")
        if self.kind == "synthetic_probe":
            direction = np.asarray(self.payload["direction"], dtype=np.float64)
            if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
                raise ValueError("synthetic_probe direction must be unit length")

    def to_json(self) -> dict:
        return {"kind": self.kind, "payload": self.payload}

    @classmethod
    def from_json(cls, data: dict) -> "ScorerSpec":
        spec = cls(kind=data["kind"], payload=dict(data.get("payload", {})))
        spec.validate()
        return spec


def probe_spec(direction, threshold: float, noise_seed: int = 0,
               noise: float = 0.0) -> ScorerSpec:
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    return ScorerSpec(kind="synthetic_probe", payload={
        "direction": direction.tolist(),
        "threshold": float(threshold),
        "noise_seed": int(noise_seed),
        "noise": float(noise),
    })


def _probe_jitter(payload: dict, genome: ModelGenome) -> float:
    """Deterministic per-(task, genome) margin jitter, standing in for the
    answer-level variability of a real evaluated model."""
    scale = float(payload.get("noise", 0.0))
    if scale == 0.0:
        return 0.0
    h = hashlib.blake2b(digest_size=8)
    h.update(str(payload.get("noise_seed", 0)).encode())
    h.update(genome.flatten().tobytes())
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))
    return scale * float(rng.standard_normal())


def score(spec: ScorerSpec, submission, judge=None, prompts=None,
          instructions: str = "") -> float:
    """Grade a submission to exactly 0.0 or 1.0.

    Task failures return 0.0; infrastructure failures (sandbox crash,
    provider outage, unparseable judge) raise and are never coerced to 0
    here -- callers decide how to fold them into skill bits.
    """
    spec.validate()
    if spec.kind == "synthetic_probe":
        if not isinstance(submission, ModelGenome):
            raise TypeError("synthetic_probe scorers grade a ModelGenome")
        direction = np.asarray(spec.payload["direction"], dtype=np.float64)
        value = float(np.dot(submission.flatten(), direction))
        value += _probe_jitter(spec.payload, submission)
        return 1.0 if value >= spec.payload["threshold"] else 0.0

    if not isinstance(submission, str):
        raise TypeError(f"{spec.kind} scorers grade a text submission")

    if spec.kind == "exact_match":
        expected = str(spec.payload["expected"])
        return 1.0 if expected.lower() == submission.lower().strip() else 0.0

    if spec.kind == "numeric_tolerance":
        try:
            value = float(submission.strip())
        except ValueError:
            return 0.0
        return 1.0 if abs(value - float(spec.payload["expected"])) < float(spec.payload["tol"]) else 0.0

    if spec.kind == "function_tests":
        result = sandbox.run_task_family(
            spec.payload["source"], submission,
            task_key=spec.payload.get("task_key", "1"))
        if result.error is not None:
            logger.debug("task scorer raised (%s); scoring 0", result.error)
            return 0.0
        return 1.0 if result.score == 1.0 else 0.0

    # llm_judge
    if judge is None or prompts is None:
        raise ValueError("llm_judge scorer requires a judge provider and prompts")
    criteria = spec.payload.get("criteria") or []
    filled = prompts.render(
        "judge_user",
        instructions=instructions or spec.payload.get("instructions", ""),
        submission=submission,
        criteria="\n".join(f"- {c}" for c in criteria),
    )
    decision = judge.decide("task_judge", filled)
    return 1.0 if decision.yes else 0.0
