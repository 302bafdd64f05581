import threading
import time

import pytest
from conftest import ScriptedTransport, chat_reply, make_record, respond

from tarkit.errors import MalformedReply, MissingField, ReplayMiss, TransportError, ValidationError
from tarkit.judge import prompts
from tarkit.judge.gateway import (
    ClaimMap,
    ConsistencyVerdict,
    ExtractedAnswer,
    HttpChatTransport,
    JudgeGateway,
    JudgeMalformed,
    PromptKind,
    VasScore,
    claim_extract_request,
    extract_claims_llm,
    parse_reply,
    render_prompt,
)
from tarkit.store import FileStore
from tarkit.trace import segment

RESPONSE = respond("At 00:05 the red car enters. Therefore, A.", "A")


def render(kind, response=RESPONSE, **overrides):
    record = make_record(response, **overrides)
    return render_prompt(kind, record, segment(record.response_text))


def test_answer_from_answer_mcq_branch():
    req = render(PromptKind.ANSWER_FROM_ANSWER)
    assert req.system_text.startswith("You are a deterministic parsing agent.")
    assert "Return ONLY one capital letter A--Z" in req.user_text
    assert "A. red car" in req.user_text
    assert req.user_text.index("Text to parse (final answer snippet):\nA") > 0
    assert req.mcq and req.temperature == 0.0


def test_answer_from_think_open_branch():
    req = render(PromptKind.ANSWER_FROM_THINK, options=None)
    assert req.system_text.startswith("You are a strict extractor.")
    assert "Open-form output format:" in req.user_text
    assert "capital letter" not in req.user_text
    assert not req.mcq


def test_consistency_sections():
    req = render(PromptKind.CONSISTENCY_GATE)
    assert req.system_text.startswith("You are a meticulous auditor.")
    for header in ("QUESTION:\n", "THINK (model's internal reasoning):\n", "ANSWER (model's final answer):\n"):
        assert header in req.user_text
    assert "Output ONLY one of the TRUE or FALSE on the first line." in req.user_text


def test_vas_prompt_carries_whole_response():
    req = render(PromptKind.VAS_SCORE)
    assert req.system_text.startswith("You are an expert judge of **claimed visual grounding**")
    assert f"Response: {RESPONSE}" in req.user_text
    assert req.user_text.endswith(prompts.VAS_USER_TAIL)


def test_claim_extract_prompt():
    req = claim_extract_request("")
    assert "If no timestamps are present, return {} exactly." in req.user_text
    assert req.user_text.endswith("The reasoning text is:\n")
    assert render(PromptKind.CLAIM_EXTRACT).user_text.endswith("At 00:05 the red car enters. Therefore, A.")


def test_render_is_deterministic_and_checks_fields():
    assert render(PromptKind.CONSISTENCY_GATE) == render(PromptKind.CONSISTENCY_GATE)
    with pytest.raises(MissingField):
        render(PromptKind.CONSISTENCY_GATE, response="<answer>A</answer>")
    with pytest.raises(MissingField):
        render(PromptKind.ANSWER_FROM_ANSWER, response="<think>x</think>")


@pytest.mark.parametrize(
    "kind, raw, mcq, payload",
    [
        (PromptKind.ANSWER_FROM_ANSWER, "UNKNOWN", True, ExtractedAnswer("UNKNOWN")),
        (PromptKind.ANSWER_FROM_ANSWER, " c \n", True, ExtractedAnswer("C")),
        (PromptKind.ANSWER_FROM_THINK, "(B)", True, ExtractedAnswer("B")),
        (PromptKind.ANSWER_FROM_ANSWER, "42", False, ExtractedAnswer("42")),
        (PromptKind.CONSISTENCY_GATE, "TRUE\nConclusion matches.", False, ConsistencyVerdict(True, "Conclusion matches.")),
        (PromptKind.CONSISTENCY_GATE, "FALSE", False, ConsistencyVerdict(False, "")),
        (PromptKind.VAS_SCORE, '{"score": 9, "rationale": "Cites colours."}', False, VasScore(9, "Cites colours.")),
        (PromptKind.VAS_SCORE, '```json\n{"score": 0, "rationale": "x"}\n```', False, VasScore(0, "x")),
        (PromptKind.CLAIM_EXTRACT, "{}", False, ClaimMap({})),
        (PromptKind.CLAIM_EXTRACT, '{"01:02": "Car enters."}', False, ClaimMap({"01:02": "Car enters."})),
    ],
)
def test_parse_reply_accepts(kind, raw, mcq, payload):
    assert parse_reply(kind, raw, mcq=mcq) == payload


@pytest.mark.parametrize(
    "kind, raw, mcq",
    [
        (PromptKind.ANSWER_FROM_ANSWER, "", True),
        (PromptKind.ANSWER_FROM_ANSWER, "The answer is C", True),
        (PromptKind.CONSISTENCY_GATE, "true", False),
        (PromptKind.CONSISTENCY_GATE, "Verdict: TRUE", False),
        (PromptKind.VAS_SCORE, "nine", False),
        (PromptKind.VAS_SCORE, '{"score": 11}', False),
        (PromptKind.VAS_SCORE, '{"score": 7.5}', False),
        (PromptKind.VAS_SCORE, '{"score": true}', False),
        (PromptKind.CLAIM_EXTRACT, "[1, 2]", False),
        (PromptKind.CLAIM_EXTRACT, '{"00:01": 3}', False),
    ],
)
def test_parse_reply_malformed(kind, raw, mcq):
    assert isinstance(parse_reply(kind, raw, mcq=mcq), JudgeMalformed)


def test_cache_hits_and_request_count(tmp_path):
    transport = ScriptedTransport(lambda req: "TRUE\nok")
    gateway = JudgeGateway(transport, store=FileStore(tmp_path))
    req = render(PromptKind.CONSISTENCY_GATE)
    first, second = gateway.invoke(req), gateway.invoke(req)
    assert not first.cache_hit and second.cache_hit
    assert first.payload == second.payload and first.raw_text == second.raw_text
    assert gateway.request_count == 1
    entry = FileStore(tmp_path).get(gateway.cache_key(req))
    assert entry["raw_text"] == "TRUE\nok" and entry["request"]["kind"] == "consistency_gate"

    replay = JudgeGateway(store=FileStore(tmp_path), replay=True)
    assert replay.invoke(req).cache_hit
    with pytest.raises(ReplayMiss):
        replay.invoke(render(PromptKind.ANSWER_FROM_ANSWER))


def test_cache_key_depends_on_model_and_text():
    req = render(PromptKind.CONSISTENCY_GATE)
    a, b = JudgeGateway(model="m1"), JudgeGateway(model="m2")
    assert a.cache_key(req) != b.cache_key(req)
    assert a.cache_key(req) != a.cache_key(render(PromptKind.CONSISTENCY_GATE, question="Other?"))


def test_refresh_overwrites():
    replies = iter(["garbage", "TRUE"])
    gateway = JudgeGateway(ScriptedTransport(lambda req: next(replies)))
    req = render(PromptKind.CONSISTENCY_GATE)
    assert gateway.invoke(req).malformed
    assert gateway.invoke(req, refresh=True).payload == ConsistencyVerdict(True, "")
    assert gateway.invoke(req).payload == ConsistencyVerdict(True, "")


def test_no_transport_raises_transport_error():
    with pytest.raises(TransportError):
        JudgeGateway().invoke(render(PromptKind.CONSISTENCY_GATE))


def test_concurrent_misses_coalesce():
    gate = threading.Event()

    def slow(req):
        gate.wait(5)
        return "TRUE"

    transport = ScriptedTransport(slow)
    gateway = JudgeGateway(transport)
    req = render(PromptKind.CONSISTENCY_GATE)
    results = []
    threads = [threading.Thread(target=lambda: results.append(gateway.invoke(req))) for _ in range(6)]
    for t in threads:
        t.start()
    time.sleep(0.1)
    gate.set()
    for t in threads:
        t.join()
    assert len(results) == 6
    assert len(transport.calls) == 1 and gateway.request_count == 1


def test_in_flight_cap():
    active, peak, lock = [0], [0], threading.Lock()

    def track(req):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.05)
        with lock:
            active[0] -= 1
        return "FALSE"

    gateway = JudgeGateway(ScriptedTransport(track), max_in_flight=2)
    requests = [render(PromptKind.CONSISTENCY_GATE, question=f"q{i}") for i in range(8)]
    threads = [threading.Thread(target=gateway.invoke, args=(r,)) for r in requests]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2 and gateway.request_count == 8


def test_http_transport(fake_server, monkeypatch):
    monkeypatch.setenv("TARKIT_JUDGE_API_KEY", "tok")
    fake_server.handler = lambda path, body, headers: (200, chat_reply("A"))
    gateway = JudgeGateway(HttpChatTransport(fake_server.url + "/v1"))
    verdict = gateway.invoke(render(PromptKind.ANSWER_FROM_ANSWER))
    assert verdict.payload == ExtractedAnswer("A")
    path, body, headers = fake_server.requests[-1]
    assert path == "/v1/chat/completions"
    assert headers["authorization"] == "Bearer tok"
    assert body["temperature"] == 0.0 and body["model"] == gateway.model
    assert [m["role"] for m in body["messages"]] == ["system", "user"]


def test_http_transport_retries_then_fails(fake_server):
    fake_server.handler = lambda path, body, headers: (503, {"error": "busy"})
    transport = HttpChatTransport(fake_server.url, attempts=3, backoff_s=0.0)
    with pytest.raises(TransportError):
        JudgeGateway(transport).invoke(render(PromptKind.ANSWER_FROM_ANSWER))
    assert len(fake_server.requests) == 3


def test_http_transport_recovers_after_transient_failure(fake_server):
    statuses = iter([500, 200])
    fake_server.handler = lambda path, body, headers: (next(statuses), chat_reply("TRUE"))
    transport = HttpChatTransport(fake_server.url, attempts=3, backoff_s=0.0)
    assert JudgeGateway(transport).invoke(render(PromptKind.CONSISTENCY_GATE)).payload.consistent


def test_http_transport_bad_body(fake_server):
    fake_server.handler = lambda path, body, headers: (200, {"choices": []})
    with pytest.raises(TransportError):
        HttpChatTransport(fake_server.url, attempts=1)(render(PromptKind.CONSISTENCY_GATE), "m")


def claims_gateway(reply):
    return JudgeGateway(ScriptedTransport(lambda req: reply))


def test_extract_claims_llm():
    cs = extract_claims_llm("Around 1:02 a car enters.", claims_gateway('{"01:02": "Car enters."}'))
    assert cs.to_dict() == {"01:02": "Car enters."}
    assert len(extract_claims_llm("   ", JudgeGateway())) == 0


def test_extract_claims_llm_drops_bad_entries_unless_strict():
    reply = '{"00:05": "Car enters.", "6": "Bad key.", "00:09": "  ", "00:05 ": "Repeat.", "00:03": "Early."}'
    cs = extract_claims_llm("text", claims_gateway(reply))
    assert [c.key for c in cs] == ["00:03", "00:05"]
    with pytest.raises(ValidationError):
        extract_claims_llm("text", claims_gateway(reply), strict=True)


def test_extract_claims_llm_malformed():
    with pytest.raises(MalformedReply):
        extract_claims_llm("text", claims_gateway("no json here"))
