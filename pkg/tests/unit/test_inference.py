"""
Inference client: bounded parallelism, retries, dump writing and resume
"""

import asyncio
import json
from collections import Counter

import httpx
import pytest

from src.config.settings import EndpointSettings
from src.core.errors import InputError, ParseFailure
from src.core.models.responses import RawModelResponse, Task
from src.core.services.inference import dry_run, infer_batch, is_transient, load_dump, run_batch
from src.core.services.prompts import ChatRequest


def endpoint(**overrides) -> EndpointSettings:
    values = dict(
        base_url="http://endpoint.test/v1", model_name="test-model", api_key="secret",
        max_parallel=2, max_retries=2, backoff_base=0.001, backoff_max=0.002,
    )
    values.update(overrides)
    return EndpointSettings(**values)


def chat_request(i: int) -> ChatRequest:
    return ChatRequest(
        request_id=f"dense_caption:v{i}", task=Task.DENSE_CAPTION, video_id=f"v{i}",
        messages=[{"role": "user", "content": [{"type": "text", "text": f"video {i}"}]}],
    )


def completion(text: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def video_of(request: httpx.Request) -> str:
    return json.loads(request.content)["messages"][0]["content"][0]["text"].split()[-1]


class TestBatch:
    @pytest.mark.asyncio
    async def test_parallelism_is_bounded(self, tmp_path):
        in_flight = 0
        peak = 0

        async def handler(request):
            nonlocal in_flight, peak
            in_flight += 1
            peak = max(peak, in_flight)
            await asyncio.sleep(0.02)
            in_flight -= 1
            return completion(f"0 - 1: step {video_of(request)}")

        requests = [chat_request(i) for i in range(6)]
        results = await infer_batch(requests, endpoint(), tmp_path / "dump.jsonl", httpx.MockTransport(handler))
        assert peak <= 2
        assert [r.request_id for r in results] == [r.request_id for r in requests]
        assert all(r.ok for r in results)
        assert results[3].text == "0 - 1: step 3"

    @pytest.mark.asyncio
    async def test_rate_limit_retried(self, tmp_path):
        calls = Counter()

        def handler(request):
            calls[video_of(request)] += 1
            if calls[video_of(request)] == 1:
                return httpx.Response(429, json={"error": "slow down"})
            return completion("ok")

        (result,) = await infer_batch([chat_request(0)], endpoint(), tmp_path / "d.jsonl", httpx.MockTransport(handler))
        assert result.ok
        assert result.attempts == 2

    @pytest.mark.asyncio
    async def test_client_error_fails_only_its_request(self, tmp_path):
        def handler(request):
            if video_of(request) == "1":
                return httpx.Response(401, json={"error": "unauthorized"})
            return completion("fine")

        results = await infer_batch(
            [chat_request(i) for i in range(3)], endpoint(), tmp_path / "d.jsonl", httpx.MockTransport(handler)
        )
        assert [r.status for r in results] == ["ok", "failed", "ok"]
        assert results[1].attempts == 1
        assert "401" in results[1].error
        assert results[1].text is None

    @pytest.mark.asyncio
    async def test_retries_exhausted(self, tmp_path):
        transport = httpx.MockTransport(lambda request: httpx.Response(503))
        (result,) = await infer_batch([chat_request(0)], endpoint(max_retries=2), tmp_path / "d.jsonl", transport)
        assert result.status == "failed"
        assert result.attempts == 3

    @pytest.mark.asyncio
    async def test_timeouts_are_retried(self, tmp_path):
        calls = []

        def handler(request):
            calls.append(request)
            raise httpx.ReadTimeout("too slow", request=request)

        (result,) = await infer_batch(
            [chat_request(0)], endpoint(max_retries=1), tmp_path / "d.jsonl", httpx.MockTransport(handler)
        )
        assert not result.ok
        assert len(calls) == 2

    @pytest.mark.asyncio
    async def test_unexpected_payload_fails_without_retry(self, tmp_path):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(200, json={"choices": []})

        (result,) = await infer_batch([chat_request(0)], endpoint(), tmp_path / "d.jsonl", httpx.MockTransport(handler))
        assert result.status == "failed"
        assert len(calls) == 1

    @pytest.mark.asyncio
    async def test_non_text_content_fails_only_its_request(self, tmp_path):
        def handler(request):
            if video_of(request) == "0":
                return httpx.Response(200, json={"choices": [{"message": {"content": {"x": 1}}}]})
            return completion("0 - 1: dons gloves")

        dump = tmp_path / "d.jsonl"
        results = await infer_batch([chat_request(i) for i in range(3)], endpoint(), dump, httpx.MockTransport(handler))
        assert [r.status for r in results] == ["failed", "ok", "ok"]
        assert "dict" in results[0].error
        assert len(dump.read_text().splitlines()) == 3

    @pytest.mark.asyncio
    async def test_request_payload_and_headers(self, tmp_path):
        seen = []

        def handler(request):
            seen.append(request)
            return completion("ok")

        await infer_batch([chat_request(0)], endpoint(), tmp_path / "d.jsonl", httpx.MockTransport(handler))
        (request,) = seen
        body = json.loads(request.content)
        assert request.url.path == "/v1/chat/completions"
        assert request.headers["Authorization"] == "Bearer secret"
        assert body["model"] == "test-model"
        assert body["temperature"] == 0.0
        assert body["messages"] == chat_request(0).messages

    @pytest.mark.asyncio
    async def test_content_parts_joined(self, tmp_path):
        def handler(request):
            parts = [{"type": "text", "text": "0 - 2: "}, {"type": "text", "text": "dons gloves"}]
            return httpx.Response(200, json={"choices": [{"message": {"content": parts}}]})

        (result,) = await infer_batch([chat_request(0)], endpoint(), tmp_path / "d.jsonl", httpx.MockTransport(handler))
        assert result.text == "0 - 2: dons gloves"

    @pytest.mark.asyncio
    async def test_every_outcome_dumped(self, tmp_path):
        def handler(request):
            return httpx.Response(400) if video_of(request) == "0" else completion("x")

        dump = tmp_path / "nested" / "dump.jsonl"
        await infer_batch([chat_request(i) for i in range(3)], endpoint(), dump, httpx.MockTransport(handler))
        lines = dump.read_text().splitlines()
        assert len(lines) == 3
        statuses = {json.loads(line)["request_id"]: json.loads(line)["status"] for line in lines}
        assert statuses == {"dense_caption:v0": "failed", "dense_caption:v1": "ok", "dense_caption:v2": "ok"}

    def test_empty_batch_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            asyncio.run(infer_batch([], endpoint(), tmp_path / "d.jsonl"))


class TestResume:
    @pytest.mark.asyncio
    async def test_skips_completed_requests(self, tmp_path):
        dump = tmp_path / "dump.jsonl"
        previous = [
            RawModelResponse(request_id="dense_caption:v0", task=Task.DENSE_CAPTION, video_id="v0", text="earlier"),
            RawModelResponse(
                request_id="dense_caption:v1", task=Task.DENSE_CAPTION, video_id="v1", status="failed", error="boom",
            ),
        ]
        dump.write_text("".join(r.model_dump_json() + "\n" for r in previous))
        asked = []

        def handler(request):
            asked.append(video_of(request))
            return completion("fresh")

        results = await run_batch([chat_request(i) for i in range(3)], endpoint(), dump, transport=httpx.MockTransport(handler))
        assert sorted(asked) == ["1", "2"]
        assert [r.text for r in results] == ["earlier", "fresh", "fresh"]
        assert all(r.ok for r in load_dump(dump))

    @pytest.mark.asyncio
    async def test_no_resume_reruns_everything(self, tmp_path):
        dump = tmp_path / "dump.jsonl"
        dump.write_text(
            RawModelResponse(request_id="dense_caption:v0", task=Task.DENSE_CAPTION, video_id="v0", text="old")
            .model_dump_json() + "\n"
        )
        results = await run_batch(
            [chat_request(0)], endpoint(), dump, resume=False,
            transport=httpx.MockTransport(lambda request: completion("new")),
        )
        assert results[0].text == "new"

    @pytest.mark.asyncio
    async def test_fully_completed_dump_makes_no_requests(self, tmp_path):
        dump = tmp_path / "dump.jsonl"
        dump.write_text(
            RawModelResponse(request_id="dense_caption:v0", task=Task.DENSE_CAPTION, video_id="v0", text="done")
            .model_dump_json() + "\n"
        )

        def handler(request):
            raise AssertionError("no request expected")

        results = await run_batch([chat_request(0)], endpoint(), dump, transport=httpx.MockTransport(handler))
        assert results[0].text == "done"


class TestLoadDump:
    def test_latest_entry_wins(self, tmp_path):
        path = tmp_path / "dump.jsonl"
        first = RawModelResponse(request_id="r", task=Task.DENSE_CAPTION, video_id="v", status="failed", error="x")
        second = RawModelResponse(request_id="r", task=Task.DENSE_CAPTION, video_id="v", text="answer")
        path.write_text(first.model_dump_json() + "\n\n" + second.model_dump_json() + "\n")
        assert load_dump(path) == [second]

    def test_undecodable_line(self, tmp_path):
        path = tmp_path / "dump.jsonl"
        path.write_text('{"request_id": "r"}\n')
        with pytest.raises(ParseFailure) as error:
            load_dump(path)
        assert ":1:" in str(error.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_dump(tmp_path / "absent.jsonl")


@pytest.mark.parametrize(
    "error,transient",
    [
        (httpx.ConnectError("refused"), True),
        (httpx.ReadTimeout("slow"), True),
        (ValueError("bad payload"), False),
    ],
)
def test_is_transient(error, transient):
    assert is_transient(error) is transient


@pytest.mark.parametrize("status,transient", [(429, True), (408, True), (500, True), (503, True), (400, False), (404, False)])
def test_status_classification(status, transient):
    request = httpx.Request("POST", "http://endpoint.test/v1/chat/completions")
    error = httpx.HTTPStatusError("status", request=request, response=httpx.Response(status, request=request))
    assert is_transient(error) is transient


def test_dry_run_lists_every_request():
    text = dry_run([chat_request(0), chat_request(1)])
    assert "### dense_caption:v0" in text
    assert "### dense_caption:v1" in text
    assert "video 1" in text
