import logging
import os
import re
import threading
import time

import requests
from dotenv import load_dotenv

from src.models import clamp_opinion

NUMBER_PATTERN = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class ProviderError(RuntimeError):
    pass


class ProviderNetworkError(ProviderError):
    pass


class ProviderTimeoutError(ProviderError):
    pass


class ProviderParseError(ProviderError):
    pass


class ProviderConfigError(ProviderError):
    pass


def parse_score(text):
    """
    A scorer reply must be a single real number, optionally wrapped in whitespace.
    """
    stripped = (text or "").strip()
    if not NUMBER_PATTERN.fullmatch(stripped):
        raise ProviderParseError(f"Scorer reply is not a single number: {stripped[:80]!r}")
    return clamp_opinion(float(stripped))


class RemoteClient:
    """
    Chat-completion client with per-request timeout, bounded retries with
    exponential backoff, and a cap on concurrent in-flight requests.
    """

    def __init__(self, config, session=None):
        load_dotenv()
        if not config.endpoint:
            raise ProviderConfigError("Remote endpoint is not configured")
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise ProviderConfigError(f"Credential variable {config.api_key_env} is not set")

        self.config = config
        self.session = session or requests.Session()
        self.session.headers.update({"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"})
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def _post(self, payload):
        with self._slots:
            response = self.session.post(self.config.endpoint, json=payload, timeout=self.config.timeout_seconds)
        response.raise_for_status()
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ProviderParseError(f"Malformed chat-completion response: {e}")

    def _backoff(self, attempt):
        delay = self.config.backoff_seconds * (2 ** attempt)
        if delay > 0:
            time.sleep(delay)

    def chat(self, system_prompt, user_content):
        payload = {
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_content}
            ]
        }

        last_error = None
        for attempt in range(self.config.max_retries):
            try:
                return self._post(payload)
            except requests.Timeout as e:
                last_error = ProviderTimeoutError(f"Request timed out after {self.config.timeout_seconds}s: {e}")
            except requests.RequestException as e:
                last_error = ProviderNetworkError(f"Request failed: {e}")
            except ProviderParseError as e:
                last_error = e
            logging.warning(f"Remote attempt {attempt + 1}/{self.config.max_retries} failed: {last_error}")
            if attempt + 1 < self.config.max_retries:
                self._backoff(attempt)
        raise last_error

    def score(self, system_prompt, text):
        """
        Ask for a stance score; an unparseable reply is retried like a failed request.
        """
        last_error = None
        for attempt in range(self.config.max_retries):
            reply = self.chat(system_prompt, text)
            try:
                return parse_score(reply)
            except ProviderParseError as e:
                last_error = e
                logging.warning(f"Unparseable score on attempt {attempt + 1}/{self.config.max_retries}: {e}")
                if attempt + 1 < self.config.max_retries:
                    self._backoff(attempt)
        raise last_error
