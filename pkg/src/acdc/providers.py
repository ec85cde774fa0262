"""Pluggable providers for every role that would normally hit an LLM.

Four roles: scientist (task generation), judge (binary decisions),
embedder (text to unit vector), subject (genome answers an instruction).
Each ships a deterministic synthetic backend for desk-scale runs and an
HTTP backend speaking the OpenAI-compatible chat-completions protocol.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ProviderUnavailable, Unparseable

logger = logging.getLogger(__name__)

API_KEY_ENV = "ACDC_API_KEY"


@dataclass
class ProviderConfig:
    backend: str = "synthetic"
    endpoint: str | None = None
    model_name: str | None = None
    request_cap: int = 4
    retry_budget: int = 2
    timeout: float = 60.0
    seed: int = 0

    def validate(self) -> None:
        if self.backend not in ("synthetic", "http"):
            raise ValueError(f"unknown provider backend {self.backend!r}")
        if self.backend == "http" and (not self.endpoint or not self.model_name):
            raise ValueError("http backend requires endpoint and model_name")
        if self.request_cap < 1:
            raise ValueError("request_cap must be >= 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")


@dataclass
class DecodeParams:
    max_tokens: int = 512
    temperature: float = 0.0
    top_p: float = 1.0


class PromptLibrary:
    """Loads prompt templates from the packaged assets, with optional overrides."""

    def __init__(self, override_dir: str | Path | None = None):
        self._override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[str, str] = {}

    def get(self, name: str) -> str:
        if name not in self._cache:
            if self._override_dir is not None:
                p = self._override_dir / f"{name}.txt"
                if p.exists():
                    self._cache[name] = p.read_text(encoding="utf-8")
                    return self._cache[name]
            ref = resources.files("acdc").joinpath("prompts", f"{name}.txt")
            self._cache[name] = ref.read_text(encoding="utf-8")
        return self._cache[name]

    def render(self, name: str, **fields) -> str:
        return self.get(name).format(**fields)


# ---------------------------------------------------------------------------
# decisions


@dataclass(frozen=True)
class Decision:
    yes: bool | None
    index: int | None
    raw: str


_DECISION_RE = re.compile(r"(?:decision|answer)\s*:\s*\**\s*(yes|no|\d+)", re.IGNORECASE)


def parse_decision(text: str) -> Decision:
    """Scan a transcript for the first 'Decision:'/'Answer:' marker, case-insensitive."""
    m = _DECISION_RE.search(text)
    if m is None:
        raise Unparseable("no decision marker in transcript")
    token = m.group(1).lower()
    if token == "yes":
        return Decision(yes=True, index=None, raw=text)
    if token == "no":
        return Decision(yes=False, index=None, raw=text)
    return Decision(yes=None, index=int(token), raw=text)


# ---------------------------------------------------------------------------
# transcript audit log


class TranscriptLog:
    """Append-only JSONL sink for provider transcripts."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def record(self, role: str, kind: str, prompt: str, response: str) -> None:
        if self.path is None:
            return
        line = json.dumps({"role": role, "kind": kind,
                           "prompt": prompt, "response": response})
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# HTTP chat-completions client


class HttpChatClient:
    """Minimal OpenAI-compatible chat-completions client with bounded retries."""

    def __init__(self, config: ProviderConfig, transport=None):
        import httpx

        config.validate()
        self.config = config
        headers = {}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=config.endpoint, headers=headers,
            timeout=config.timeout, transport=transport,
        )
        self._semaphore = threading.Semaphore(config.request_cap)

    def chat(self, messages: list[dict], decode: DecodeParams | None = None) -> str:
        import httpx

        decode = decode or DecodeParams()
        body = {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": decode.temperature,
            "max_tokens": decode.max_tokens,
        }
        last_error: Exception | None = None
        for _ in range(self.config.retry_budget + 1):
            try:
                with self._semaphore:
                    resp = self._client.post("/v1/chat/completions", json=body)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
        raise ProviderUnavailable(f"chat completion failed: {last_error}")

    def embed(self, text: str) -> np.ndarray:
        import httpx

        body = {"model": self.config.model_name, "input": text}
        last_error: Exception | None = None
        for _ in range(self.config.retry_budget + 1):
            try:
                with self._semaphore:
                    resp = self._client.post("/v1/embeddings", json=body)
                resp.raise_for_status()
                vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
                norm = np.linalg.norm(vec)
                return vec / norm if norm > 0 else vec
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
        raise ProviderUnavailable(f"embedding failed: {last_error}")


# ---------------------------------------------------------------------------
# judges


class ScriptedJudge:
    """Judge returning a preset queue of decisions; for tests and filters.

    Queue items: "yes"/"no"/int (a pre-parsed decision) or a raw transcript
    string that goes through the normal marker parser. An empty queue falls
    back to ``default`` ("yes"/"no"), or raises Unparseable when None.
    """

    def __init__(self, decisions=(), default: str | None = None):
        self._queue = list(decisions)
        self.default = default
        self.calls: list[tuple[str, str]] = []

    def decide(self, kind: str, filled_prompt: str, context=None) -> Decision:
        self.calls.append((kind, filled_prompt))
        if self._queue:
            item = self._queue.pop(0)
        elif self.default is not None:
            item = self.default
        else:
            raise Unparseable("scripted judge queue exhausted")
        if isinstance(item, bool):
            return Decision(yes=item, index=None, raw=str(item))
        if isinstance(item, int):
            return Decision(yes=None, index=item, raw=str(item))
        return parse_decision(item if ":" in item else f"Decision: {item}")


class SyntheticJudge:
    """Deterministic judge policy for synthetic end-to-end runs.

    Gibberish checks flag responses whose reported parameter norm exceeds
    ``norm_limit`` -- the synthetic analogue of an incoherent model produced
    by extreme merge extrapolation. Novelty checks reject only
    near-duplicates (max cosine similarity above ``duplicate_threshold``,
    supplied by the caller via ``context``), and selection prompts pick the
    first candidate.
    """

    _NORM_RE = re.compile(r"norm=([0-9.]+)")

    def __init__(self, duplicate_threshold: float = 0.99,
                 norm_limit: float | None = None):
        self.duplicate_threshold = duplicate_threshold
        self.norm_limit = norm_limit

    def decide(self, kind: str, filled_prompt: str, context=None) -> Decision:
        if kind == "gibberish":
            if self.norm_limit is not None:
                norms = [float(x) for x in self._NORM_RE.findall(filled_prompt)]
                if norms and max(norms) > self.norm_limit:
                    return Decision(yes=True, index=None, raw="Answer: Yes")
            return Decision(yes=False, index=None, raw="Answer: No")
        if kind == "novelty":
            sims = (context or {}).get("similarities", ())
            if sims and max(sims) > self.duplicate_threshold:
                return Decision(yes=False, index=None, raw="Decision: No")
            return Decision(yes=True, index=None, raw="Decision: Yes")
        if kind in ("bon_pair", "bon_monarch"):
            return Decision(yes=None, index=1, raw="Decision: 1")
        return Decision(yes=True, index=None, raw="Decision: Yes")


class HttpJudge:
    """Judge backed by a chat-completions endpoint; retries unparseable output."""

    _SYSTEM_PROMPTS = {
        "gibberish": "gibberish_system",
        "novelty": "novelty_system",
        "task_judge": "judge_system",
    }

    def __init__(self, client: HttpChatClient, prompts: PromptLibrary,
                 transcripts: TranscriptLog | None = None):
        self.client = client
        self.prompts = prompts
        self.transcripts = transcripts or TranscriptLog()

    def decide(self, kind: str, filled_prompt: str, context=None) -> Decision:
        messages = []
        system_name = self._SYSTEM_PROMPTS.get(kind)
        if system_name is not None:
            messages.append({"role": "system", "content": self.prompts.get(system_name)})
        messages.append({"role": "user", "content": filled_prompt})
        last: Exception | None = None
        for _ in range(self.client.config.retry_budget + 1):
            text = self.client.chat(messages)
            self.transcripts.record("judge", kind, filled_prompt, text)
            try:
                return parse_decision(text)
            except Unparseable as exc:
                last = exc
        raise Unparseable(f"judge output unparseable after retries: {last}")


# ---------------------------------------------------------------------------
# embedders


def _digest_seed(*parts: str) -> int:
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class SyntheticEmbedder:
    """Hash-projection embedder: deterministic unit vector per distinct text."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 2:
            raise ValueError("embedding dim must be >= 2")
        self.dim = dim
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        rng = np.random.Generator(np.random.PCG64(_digest_seed(str(self.seed), text)))
        vec = rng.standard_normal(self.dim)
        norm = np.linalg.norm(vec)
        if norm == 0.0:  # astronomically unlikely; regenerate deterministically
            vec = np.ones(self.dim)
            norm = np.linalg.norm(vec)
        return vec / norm


class HttpEmbedder:
    def __init__(self, client: HttpChatClient):
        self.client = client

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        return self.client.embed(text)


# ---------------------------------------------------------------------------
# subject models


def genome_fingerprint(genome) -> str:
    """Canonical serialization of probe-relevant genome statistics."""
    flat = genome.flatten()
    head = np.array2string(flat[:8], precision=6, separator=",")
    return (f"norm={np.linalg.norm(flat):.6f} mean={flat.mean():.6f} "
            f"head={head}")


class SyntheticSubject:
    """Deterministic stand-in for querying a model: answers are a pure
    function of (genome, instruction)."""

    def answer(self, genome, instruction: str,
               decode: DecodeParams | None = None) -> str:
        fp = genome_fingerprint(genome)
        tag = hashlib.blake2b(f"{fp}|{instruction}".encode(), digest_size=6).hexdigest()
        return f"Answer: [{tag}] {fp}"


class HttpSubject:
    """Queries a served model over chat completions; the genome stands for a
    model name at the endpoint."""

    def __init__(self, client: HttpChatClient, prompts: PromptLibrary,
                 transcripts: TranscriptLog | None = None):
        self.client = client
        self.prompts = prompts
        self.transcripts = transcripts or TranscriptLog()

    def answer(self, model_name: str, instruction: str,
               decode: DecodeParams | None = None) -> str:
        messages = [
            {"role": "system", "content": self.prompts.get("eval_system")},
            {"role": "user", "content": instruction},
        ]
        text = self.client.chat(messages, decode)
        self.transcripts.record("subject", "answer", instruction, text)
        return text


def extract_answer(transcript: str) -> str:
    """Reference extractor: text after the first 'Answer:' marker, else whole text."""
    m = re.search(r"answer\s*:", transcript, re.IGNORECASE)
    if m is None:
        return transcript.strip()
    return transcript[m.end():].strip()


# ---------------------------------------------------------------------------
# reward models


class ScriptedReward:
    def __init__(self, scores):
        self._scores = list(scores)
        self.calls = 0

    def score_answer(self, instruction: str, answer: str) -> float:
        self.calls += 1
        return float(self._scores.pop(0))


class HttpReward:
    """Chat-completions-style scoring endpoint returning a number in the
    message body. Provider-specific; no standard wire protocol exists."""

    def __init__(self, client: HttpChatClient):
        self.client = client

    def score_answer(self, instruction: str, answer: str) -> float:
        text = self.client.chat([
            {"role": "user",
             "content": f"Instruction: {instruction}\n\nSubmission: {answer}"},
        ])
        m = re.search(r"-?\d+(?:\.\d+)?", text)
        if m is None:
            raise ProviderUnavailable(f"reward endpoint returned no number: {text!r}")
        return float(m.group(0))
