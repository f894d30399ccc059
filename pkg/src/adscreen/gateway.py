"""Chat-endpoint classification: HTTP client, verdict parsing and a bundled mock.

The wire protocol is a single POST of {model, messages, temperature,
max_tokens} to /v1/chat/completions, answered with generated text plus a
finish reason. The mock server speaks the identical protocol locally so the
full pipeline can run without any served model.
"""

from __future__ import annotations

import json
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .baselines import Prediction
from .cue_analyzer import CueLexicon, DEFAULT_LEXICON, cue_coverage, tokenize
from .prompt_compiler import PromptBundle, TRANSCRIPT_CLOSE, TRANSCRIPT_OPEN

CHAT_COMPLETIONS_PATH = "/v1/chat/completions"
BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2.0


class GatewayError(RuntimeError):
    pass


class Unreachable(GatewayError):
    """Transport failures or server errors persisted through every retry."""


class Unparseable(GatewayError):
    """No verdict line in the completion after all attempts."""


class AuthFailure(GatewayError):
    pass


class MalformedBundle(GatewayError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://127.0.0.1:8700"
    model_name: str = "mock"
    api_key_env: str = "ADSCREEN_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    max_output_tokens: int = 512


@dataclass(frozen=True)
class CompletionRecord:
    fingerprint: str
    raw_response: str
    parsed: str | None
    latency_ms: float
    attempt_count: int

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "raw_response": self.raw_response,
            "parsed": self.parsed,
            "latency_ms": self.latency_ms,
            "attempt_count": self.attempt_count,
        }


_VERDICT_RE = re.compile(r"Diagnosis:\s*(.+)", re.IGNORECASE)
_NON_AD_RE = re.compile(r"^non[\s-]?ad\b", re.IGNORECASE)
_AD_RE = re.compile(r"^ad\b", re.IGNORECASE)


def parse_label(completion: str) -> str:
    """Read the final "Diagnosis: ..." line; non-AD variants win over bare AD."""
    matches = _VERDICT_RE.findall(completion)
    if not matches:
        raise Unparseable("no 'Diagnosis:' line in completion")
    verdict = matches[-1].strip()
    if _NON_AD_RE.match(verdict):
        return "non_AD"
    if _AD_RE.match(verdict):
        return "AD"
    raise Unparseable(f"unrecognized verdict {verdict!r}")


@dataclass(frozen=True)
class MockRule:
    """Threshold rule: proportion strictly below threshold means AD."""

    threshold: float = 0.5
    lexicon: CueLexicon = DEFAULT_LEXICON


_CUE_LINE_RE = re.compile(r"Cue coverage:\s*(\d+)\s*/\s*(\d+)")


def _extract_transcript(content: str) -> str | None:
    start = content.rfind(TRANSCRIPT_OPEN)
    if start == -1:
        return None
    end = content.find(TRANSCRIPT_CLOSE, start)
    if end == -1:
        return None
    return content[start + len(TRANSCRIPT_OPEN) : end].strip()


def mock_classify(bundle_messages, rule: MockRule = MockRule(), mode: str | None = None) -> str:
    """Produce a deterministic well-formed completion for a message sequence.

    Accepts either a PromptBundle or a raw (role, content) sequence, so the
    HTTP mock handler can reuse it.
    """
    if isinstance(bundle_messages, PromptBundle):
        mode = bundle_messages.mode
        messages = bundle_messages.messages
    else:
        messages = tuple(bundle_messages)

    user_contents = [c for r, c in messages if r == "user"]
    if not user_contents:
        raise MalformedBundle("no user message")
    last_user = user_contents[-1]

    m = _CUE_LINE_RE.search(last_user)
    if m:
        k, denom = int(m.group(1)), int(m.group(2))
        proportion = k / denom
    else:
        if mode == "cot":
            raise MalformedBundle("cot bundle lacks a 'Cue coverage: k/12' line")
        transcript = _extract_transcript(last_user)
        if transcript is None:
            raise MalformedBundle("no cue line and no delimited transcript block")
        report = cue_coverage(tokenize(transcript), rule.lexicon)
        k = len(report.matched)
        denom = len(rule.lexicon.entries)
        proportion = report.proportion

    label = "AD" if proportion < rule.threshold else "non-AD"
    return (
        f"The participant mentioned {k} of the {denom} key scene cues "
        f"(coverage {k}/{denom}). "
        f"A sparse description suggests impaired scene recall; a rich one does not. "
        f"Diagnosis: {label}"
    )


def _auth_headers(cfg: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(cfg.api_key_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def classify(
    bundle: PromptBundle,
    cfg: EndpointConfig,
    participant_id: str,
    *,
    session: requests.Session | None = None,
    sleep=time.sleep,
) -> tuple[Prediction, CompletionRecord]:
    """Send a bundle to the endpoint and parse the verdict.

    Retries transport errors, 5xx responses and unparseable completions with
    exponential backoff (base 500 ms, factor 2, jittered).
    """
    url = cfg.base_url.rstrip("/") + CHAT_COMPLETIONS_PATH
    body = {
        "model": cfg.model_name,
        "messages": [{"role": r, "content": c} for r, c in bundle.messages],
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
    }
    http = session if session is not None else requests
    started = time.perf_counter()
    last_error: Exception | None = None
    attempts = 0
    for attempt in range(cfg.max_retries + 1):
        if attempt > 0:
            sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1) * (0.5 + random.random()))
        attempts = attempt + 1
        try:
            response = http.post(
                url, json=body, headers=_auth_headers(cfg), timeout=cfg.timeout
            )
        except requests.RequestException as exc:
            last_error = Unreachable(f"transport error: {exc}")
            continue
        if response.status_code in (401, 403):
            raise AuthFailure(
                f"endpoint rejected credentials from ${cfg.api_key_env} "
                f"(HTTP {response.status_code})"
            )
        if response.status_code >= 500:
            last_error = Unreachable(f"server error HTTP {response.status_code}")
            continue
        if response.status_code >= 400:
            raise GatewayError(f"endpoint error HTTP {response.status_code}: {response.text}")
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            last_error = Unreachable(f"malformed response body: {exc}")
            continue
        try:
            label = parse_label(content)
        except Unparseable as exc:
            last_error = exc
            continue
        latency_ms = (time.perf_counter() - started) * 1000.0
        record = CompletionRecord(
            fingerprint=bundle.fingerprint,
            raw_response=content,
            parsed=label,
            latency_ms=latency_ms,
            attempt_count=attempts,
        )
        score = 1.0 if label == "AD" else -1.0
        return Prediction(participant_id, label, score, "llm"), record

    if isinstance(last_error, Unparseable):
        raise Unparseable(f"{last_error} after {attempts} attempts")
    raise Unreachable(f"{last_error} after {attempts} attempts")


def classify_with_mock(
    bundle: PromptBundle, rule: MockRule, participant_id: str
) -> tuple[Prediction, CompletionRecord]:
    """In-process mock path: no transport, same record shape."""
    started = time.perf_counter()
    content = mock_classify(bundle, rule)
    label = parse_label(content)
    record = CompletionRecord(
        fingerprint=bundle.fingerprint,
        raw_response=content,
        parsed=label,
        latency_ms=(time.perf_counter() - started) * 1000.0,
        attempt_count=1,
    )
    score = 1.0 if label == "AD" else -1.0
    return Prediction(participant_id, label, score, "mock"), record


def classify_many(
    items: list[tuple[str, PromptBundle]],
    cfg: EndpointConfig,
    *,
    max_in_flight: int = 4,
    sleep=time.sleep,
) -> list[tuple[Prediction, CompletionRecord]]:
    """Concurrent classification; results are sorted by participant_id on flush."""
    with requests.Session() as session:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = [
                pool.submit(
                    classify, bundle, cfg, pid, session=session, sleep=sleep
                )
                for pid, bundle in items
            ]
            results = [f.result() for f in futures]
    return sorted(results, key=lambda pair: pair[0].participant_id)


class _MockHandler(BaseHTTPRequestHandler):
    rule: MockRule = MockRule()

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def do_POST(self):
        if self.path != CHAT_COMPLETIONS_PATH:
            self._send(404, {"error": {"message": f"unknown path {self.path}"}})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length))
            messages = [(m["role"], m["content"]) for m in body["messages"]]
            content = mock_classify(messages, self.rule)
        except (ValueError, KeyError, TypeError, MalformedBundle) as exc:
            self._send(400, {"error": {"message": str(exc)}})
            return
        self._send(
            200,
            {
                "id": "mock-completion",
                "model": body.get("model", "mock"),
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop",
                    }
                ],
            },
        )

    def _send(self, status: int, payload: dict):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def make_mock_server(port: int = 0, rule: MockRule = MockRule()) -> ThreadingHTTPServer:
    """Bind the bundled mock endpoint on the given port (0 picks a free one)."""
    handler = type("MockHandler", (_MockHandler,), {"rule": rule})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)
