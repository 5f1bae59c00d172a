"""Chat-completion client for driving an external model as decision engine.

Requests carry the scenario prompt as a single user message; the reply's
first choice content is parsed with the tolerant decision parser.  Network
faults (connection errors, timeouts, HTTP 5xx/429) are retried with
jittered exponential backoff; unusable bodies are protocol errors and are
never retried.  Concurrent trials are capped at a configured number of
in-flight requests and results are returned in trial order.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests

from .engines import EngineDecision, EngineRequest, build_prompt, parse_decision
from .errors import EngineNetworkError, ProtocolError, ValidationError

RETRIABLE_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    api_key_env: str = "PRIVFAIR_API_KEY"
    timeout: float = 30.0
    max_in_flight: int = 4
    attempts: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0

    def __post_init__(self):
        if self.attempts < 1:
            raise ValidationError(f"attempts must be >= 1, got {self.attempts}")
        if self.max_in_flight < 1:
            raise ValidationError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.timeout <= 0:
            raise ValidationError(f"timeout must be > 0, got {self.timeout}")

    @classmethod
    def from_dict(cls, data: dict) -> "EndpointConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown endpoint config keys: {sorted(unknown)}")
        if "url" not in data or "model" not in data:
            raise ValidationError("endpoint config requires 'url' and 'model'")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "EndpointConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class RemoteEngine:
    """Decision engine backed by a chat-completion endpoint."""

    def __init__(self, config: EndpointConfig, session=None, sleep=time.sleep):
        self.config = config
        # default to the module: requests.post opens a fresh connection per
        # call, which keeps concurrent trials free of shared-session state
        self._session = session if session is not None else requests
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_once(self, payload: dict) -> str:
        try:
            resp = self._session.post(
                self.config.url,
                json=payload,
                headers=self._headers(),
                timeout=self.config.timeout,
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise EngineNetworkError(f"transport failure: {exc}") from exc
        if resp.status_code in RETRIABLE_STATUS:
            raise EngineNetworkError(f"server answered HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProtocolError(
                f"server answered HTTP {resp.status_code}", body=resp.text
            )
        try:
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(
                f"response envelope is not chat-completion shaped: {exc}", body=resp.text
            ) from exc

    def decide(self, request: EngineRequest, rng: np.random.Generator) -> EngineDecision:
        prompt = build_prompt(
            request.scenario, request.profiles, request.candidates, request.context
        )
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: EngineNetworkError | None = None
        for attempt in range(self.config.attempts):
            if attempt > 0:
                delay = min(
                    self.config.backoff_base * 2 ** (attempt - 1),
                    self.config.backoff_cap,
                )
                self._sleep(delay * (1.0 + 0.25 * rng.random()))
            try:
                content = self._post_once(payload)
            except EngineNetworkError as exc:
                exc.request = request
                last_error = exc
                continue
            except ProtocolError as exc:
                exc.request = request
                raise  # unusable body: retrying cannot help
            try:
                return parse_decision(content, request.scenario, request.candidate_ids)
            except ProtocolError as exc:
                exc.request = request
                raise
        raise EngineNetworkError(
            f"giving up after {self.config.attempts} attempts: {last_error}",
            request=request,
        )


def map_requests(engine, requests_list, base_seed: int = 0, max_in_flight: int | None = None):
    """Evaluate many engine requests concurrently, results in trial order.

    Each trial gets the derived seed base_seed + index.  Failures are
    returned in place of decisions rather than raised, so one bad trial does
    not abort a sweep.
    """
    cap = max_in_flight
    if cap is None:
        cap = getattr(getattr(engine, "config", None), "max_in_flight", 1)

    def run(i_request):
        i, request = i_request
        rng = np.random.default_rng(base_seed + i)
        try:
            return engine.decide(request, rng)
        except Exception as exc:  # collected per trial
            return exc

    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(run, enumerate(requests_list)))
