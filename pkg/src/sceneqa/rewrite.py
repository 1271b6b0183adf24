"""Rewrite track: turning short-answer questions into PM / FV items via a
text-generation service, with strict validation and bounded retries.

A short-answer question (SAQ) plus its answer is sent to the service with a
fixed prompt.  For prompt-matching (PM) the service must return a multiple
choice question whose options embed the original answer verbatim at a
pre-assigned letter; for fact verification (FV) it must return a statement
question and its inverted contrapositive with opposite yes/no answers.  Every
response is validated structurally; invalid responses are regenerated up to
five attempts total per job before :class:`ExhaustedAttemptsError` is raised.

Expected-correct letters and boolean indicators are assigned by the same
index-based schedules used by rule generation, so option letters stay within
one of N/5 across any batch.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .errors import (
    ExhaustedAttemptsError,
    InsufficientCandidatesError,
    QueueEmptyError,
    SceneQaError,
    SchemaViolationError,
    ServiceUnavailableError,
)
from .rulegen import (
    PROVENANCE_LLM,
    QaRecord,
    Schedules,
    VARIANT_PLAIN,
    build_schedules,
)
from .templates import CAT_NON_NUMERIC, TASK_FV, TASK_PM
from .util import read_jsonl

PROMPT_VERSION = "1.0.0"

SYSTEM_PROMPT = (
    "You are an AI assistant providing accurate, detailed, and polite "
    "explanations. Your goal is to give clear and helpful responses. "
    "Distances refer to convex hull distances, the shortest distance between "
    "points on the convex hulls of two objects, where a convex hull is the "
    "smallest convex shape enclosing an object. Volumes refer to the space "
    "within an object's minimum axis-aligned bounding box (AABB), a "
    "rectangular box aligned with the coordinate axes. Always use these "
    "definitions for distances and volumes."
)

PM_PROMPT_TEMPLATE = """Please rewrite a Short Answer Question (SAQ) into a Prompt Matching (PM) question with {n_options} options.

Input:
- Original SAQ: {question}
- Original Answer: {answer}
- Expected Correct Option: {label}
- Number of Options: {n_options}

Task Description:
1. Convert the SAQ into a clear and concise PM question.
2. Generate {n_distractors} incorrect options as distractors:
   - Keep distractors in the same category as the correct answer (e.g., if the answer is a noun, all distractors should be nouns).
   - Ensure distractors are plausible but clearly incorrect.
   - Avoid synonyms of the correct answer, overly obvious wrong choices, or options that reveal the correct answer.
3. Place the correct answer exactly as given (including any spelling variations) at the expected correct option.
4. Format the options as: "A) Option A  B) Option B  C) Option C ..." and keep the correct answer at the expected option letter.
5. Include a hint in the question instructing to answer using the correct option letter.

Output Format:
Return only a JSON object with the following keys:
{{
  "question": "The rewritten PM question",
  "Answer": "The correct option letter (e.g., 'A')"
}}
Do not include any additional text or explanations outside this JSON object.

Example Input:
- Original SAQ: What is the capital of France?
- Original Answer: Parris
- Expected Correct Option: B
- Number of Options: 4

Example Output:
{{
  "question": "What is the capital of France? Answer using the correct option letter. A) Berlin  B) Parris  C) London  D) Rome",
  "Answer": "B"
}}"""

FV_PROMPT_TEMPLATE = """Please rewrite a Short Answer Question (SAQ) into a Fact Verification (FV) question together with its contrapositive variant.

Input:
- Original SAQ: {question}
- Original Answer: {answer}
- Boolean Indicator: {indicator}
- Affirmative Word: {affirmative}
- Negative Word: {negative}

Task Description:
1. Turn the SAQ and its answer into a declarative statement.
2. If the Boolean Indicator is true, keep the statement affirmative so the correct reply is "{affirmative}"; if it is false, negate the statement so the correct reply is "{negative}".
3. Produce the contrapositive variant by inverting the statement and the expected reply.
4. End each question with an instruction to answer with "{affirmative}" or "{negative}".

Output Format:
Return only a JSON object with the following keys:
{{
  "question": "The rewritten FV question",
  "Answer": "The expected reply ({affirmative} or {negative})",
  "cp_question": "The inverted FV question",
  "cp_answer": "The opposite reply"
}}
Do not include any additional text or explanations outside this JSON object.

Example Input:
- Original SAQ: Who sits next to Alice?
- Original Answer: Bob
- Boolean Indicator: false
- Affirmative Word: yes
- Negative Word: no

Example Output:
{{
  "question": "Bob does not sit next to Alice. Is this correct? Answer with \\"yes\\" or \\"no\\".",
  "Answer": "no",
  "cp_question": "Bob sits next to Alice. Is this correct? Answer with \\"yes\\" or \\"no\\".",
  "cp_answer": "yes"
}}"""

KIND_PM = "pm"
KIND_FV = "fv"

# validation failure reason codes
NOT_JSON = "NotJson"
MISSING_KEY = "MissingKey"
WRONG_OPTION_COUNT = "WrongOptionCount"
ANSWER_NOT_AT_EXPECTED_LABEL = "AnswerNotAtExpectedLabel"
DUPLICATE_OPTIONS = "DuplicateOptions"
ANSWER_LEAK = "AnswerLeak"
BAD_ANSWER_WORD = "BadAnswerWord"
CP_NOT_INVERTED = "CpNotInverted"


@dataclass(frozen=True)
class SaqItem:
    question: str
    answer: str
    scene_id: str = ""


@dataclass(frozen=True)
class RewriteJob:
    job_id: str
    saq: SaqItem
    kind: str
    n_options: int = 5
    expected_label: str | None = None
    boolean_indicator: bool | None = None
    affirmative_word: str = "yes"
    negative_word: str = "no"

    def __post_init__(self):
        if self.kind == KIND_PM:
            if not 2 <= self.n_options <= 5:
                raise SceneQaError("PM jobs support 2 to 5 options")
            labels = [chr(ord("A") + i) for i in range(self.n_options)]
            if self.expected_label not in labels:
                raise SceneQaError(
                    f"expected_label must be one of {labels}, got {self.expected_label!r}"
                )
        elif self.kind == KIND_FV:
            if self.boolean_indicator is None:
                raise SceneQaError("FV jobs need a boolean indicator")
        else:
            raise SceneQaError(f"unknown rewrite kind {self.kind!r}")


def render_prompt(job: RewriteJob) -> str:
    if job.kind == KIND_PM:
        return PM_PROMPT_TEMPLATE.format(
            n_options=job.n_options,
            n_distractors=job.n_options - 1,
            question=job.saq.question,
            answer=job.saq.answer,
            label=job.expected_label,
        )
    return FV_PROMPT_TEMPLATE.format(
        question=job.saq.question,
        answer=job.saq.answer,
        indicator="true" if job.boolean_indicator else "false",
        affirmative=job.affirmative_word,
        negative=job.negative_word,
    )


# ---------------------------------------------------------------------------
# Service clients
# ---------------------------------------------------------------------------


class ServiceClient(Protocol):
    def complete(self, system_prompt: str, user_prompt: str) -> str: ...


class ScriptedClient:
    """Replays a fixed queue of responses; raises when the queue runs dry."""

    def __init__(self, responses: Sequence[str]):
        self._queue = list(responses)
        self.call_count = 0
        self.prompts: list[tuple[str, str]] = []

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        self.prompts.append((system_prompt, user_prompt))
        if not self._queue:
            raise QueueEmptyError(
                f"scripted client exhausted after {self.call_count} calls"
            )
        self.call_count += 1
        return self._queue.pop(0)


def stub_client(*responses: str) -> ScriptedClient:
    return ScriptedClient(list(responses))


_STUB_DISTRACTORS = (
    "granite", "velvet", "copper", "maroon", "juniper", "basalt",
    "saffron", "cobalt", "walnut", "amber", "onyx", "fern",
)


class EchoStubClient:
    """Offline stand-in for the rewrite service.

    Parses the job fields back out of the prompt and emits a structurally
    valid response, so whole pipelines can run without network access.
    """

    def __init__(self):
        self.call_count = 0

    @staticmethod
    def _field(user_prompt: str, name: str) -> str:
        match = re.search(rf"^- {re.escape(name)}: (.*)$", user_prompt, re.M)
        if match is None:
            raise SceneQaError(f"stub could not find prompt field {name!r}")
        return match.group(1).strip()

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        self.call_count += 1
        question = self._field(user_prompt, "Original SAQ")
        answer = self._field(user_prompt, "Original Answer")
        if "Expected Correct Option" in user_prompt:
            label = self._field(user_prompt, "Expected Correct Option")
            n_options = int(self._field(user_prompt, "Number of Options"))
            distractors = [
                d for d in _STUB_DISTRACTORS
                if answer.lower() not in d.lower() and d.lower() not in answer.lower()
            ][: n_options - 1]
            options = []
            slot = ord(label) - ord("A")
            di = 0
            for i in range(n_options):
                letter = chr(ord("A") + i)
                if i == slot:
                    options.append(f"{letter}) {answer}")
                else:
                    options.append(f"{letter}) {distractors[di]}")
                    di += 1
            text = (
                f"{question} Answer using the correct option letter. "
                + "  ".join(options)
            )
            return json.dumps({"question": text, "Answer": label})
        indicator = self._field(user_prompt, "Boolean Indicator") == "true"
        affirmative = self._field(user_prompt, "Affirmative Word")
        negative = self._field(user_prompt, "Negative Word")
        saq = question.rstrip("?. ")
        positive = f"The answer to \"{saq}?\" is {answer}."
        negated = f"The answer to \"{saq}?\" is not {answer}."
        hint = f' Is this correct? Answer with "{affirmative}" or "{negative}".'
        if indicator:
            payload = {
                "question": positive + hint, "Answer": affirmative,
                "cp_question": negated + hint, "cp_answer": negative,
            }
        else:
            payload = {
                "question": negated + hint, "Answer": negative,
                "cp_question": positive + hint, "cp_answer": affirmative,
            }
        return json.dumps(payload)


class HttpServiceClient:
    """Chat-completion HTTP client with bounded retries.

    ``transport`` is injectable for tests; it must behave like
    ``requests.post``.  Raises :class:`ServiceUnavailableError` once retries
    are exhausted.
    """

    def __init__(self, endpoint: str, model: str, timeout: float = 30.0,
                 retries: int = 2, temperature: float | None = None,
                 max_tokens: int | None = None,
                 headers: dict | None = None,
                 transport: Callable | None = None,
                 retry_wait: float = 1.0):
        if transport is None:
            import requests

            transport = requests.post
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.headers = dict(headers or {})
        self.retry_wait = retry_wait
        self._post = transport
        self.call_count = 0

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        self.call_count += 1
        payload: dict = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        }
        if self.temperature is not None:
            payload["temperature"] = self.temperature
        if self.max_tokens is not None:
            payload["max_tokens"] = self.max_tokens

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self._post(
                    self.endpoint, json=payload, timeout=self.timeout,
                    headers=self.headers,
                )
                status = getattr(response, "status_code", 200)
                if status >= 500:
                    raise ServiceUnavailableError(f"server returned {status}")
                if status >= 400:
                    raise ServiceUnavailableError(
                        f"request rejected with {status}: {getattr(response, 'text', '')[:200]}"
                    )
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - every failure is retriable here
                last_error = exc
                if attempt < self.retries and self.retry_wait > 0:
                    time.sleep(self.retry_wait)
        raise ServiceUnavailableError(
            f"service unreachable after {self.retries + 1} attempts: {last_error}"
        ) from last_error


# ---------------------------------------------------------------------------
# Response validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationVerdict:
    ok: bool
    reasons: tuple[str, ...] = ()
    detail: str = ""
    payload: dict | None = None


def extract_json_object(text: str) -> dict | None:
    """First balanced top-level JSON object embedded anywhere in ``text``."""
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text[match.start():])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


_OPTION_MARKER_RE = re.compile(r"(?:(?<=\s)|(?<=^))([A-Z])\)")


def parse_options(question: str) -> tuple[str, list[tuple[str, str]]] | None:
    """Split a PM question into (stem, [(letter, option text), ...]).

    Returns None when no option markers are present.
    """
    markers = list(_OPTION_MARKER_RE.finditer(question))
    if not markers:
        return None
    stem = question[: markers[0].start()].strip()
    options = []
    for i, marker in enumerate(markers):
        end = markers[i + 1].start() if i + 1 < len(markers) else len(question)
        options.append((marker.group(1), question[marker.end():end].strip()))
    return stem, options


def validate_pm_response(text: str, job: RewriteJob) -> ValidationVerdict:
    payload = extract_json_object(text)
    if payload is None:
        return ValidationVerdict(False, (NOT_JSON,), "no JSON object found")
    missing = [k for k in ("question", "Answer") if not isinstance(payload.get(k), str)]
    if missing:
        return ValidationVerdict(False, (MISSING_KEY,), f"missing keys {missing}", payload)

    reasons: list[str] = []
    details: list[str] = []
    if payload["Answer"].strip() != job.expected_label:
        reasons.append(ANSWER_NOT_AT_EXPECTED_LABEL)
        details.append(
            f"Answer key is {payload['Answer'].strip()!r}, expected {job.expected_label!r}"
        )

    parsed = parse_options(payload["question"])
    expected_letters = [chr(ord("A") + i) for i in range(job.n_options)]
    if parsed is None:
        return ValidationVerdict(
            False, tuple(reasons) + (WRONG_OPTION_COUNT,),
            "; ".join(details + ["no option markers found"]), payload,
        )
    _, options = parsed
    letters = [letter for letter, _ in options]
    if letters != expected_letters or any(not text for _, text in options):
        reasons.append(WRONG_OPTION_COUNT)
        details.append(f"option letters {letters}, expected {expected_letters}")
    else:
        by_letter = dict(options)
        if by_letter[job.expected_label] != job.saq.answer:
            reasons.append(ANSWER_NOT_AT_EXPECTED_LABEL)
            details.append(
                f"option {job.expected_label} is {by_letter[job.expected_label]!r}, "
                f"expected the answer verbatim"
            )
        lowered = [text.lower() for _, text in options]
        if len(set(lowered)) != len(lowered):
            reasons.append(DUPLICATE_OPTIONS)
            details.append("duplicate option texts")
        answer_low = job.saq.answer.lower()
        for letter, text_opt in options:
            if letter != job.expected_label and answer_low in text_opt.lower():
                reasons.append(ANSWER_LEAK)
                details.append(f"option {letter} contains the answer")
                break
    if reasons:
        return ValidationVerdict(False, tuple(reasons), "; ".join(details), payload)
    return ValidationVerdict(True, (), "", payload)


def validate_fv_response(text: str, job: RewriteJob) -> ValidationVerdict:
    payload = extract_json_object(text)
    if payload is None:
        return ValidationVerdict(False, (NOT_JSON,), "no JSON object found")
    keys = ("question", "Answer", "cp_question", "cp_answer")
    missing = [k for k in keys if not isinstance(payload.get(k), str)]
    if missing:
        return ValidationVerdict(False, (MISSING_KEY,), f"missing keys {missing}", payload)

    reasons: list[str] = []
    details: list[str] = []
    words = {job.affirmative_word, job.negative_word}
    answer = payload["Answer"].strip().lower()
    cp_answer = payload["cp_answer"].strip().lower()
    for name, value in (("Answer", answer), ("cp_answer", cp_answer)):
        if value not in words:
            reasons.append(BAD_ANSWER_WORD)
            details.append(f"{name} is {value!r}, expected one of {sorted(words)}")
    for name in ("question", "cp_question"):
        low = payload[name].lower()
        if job.affirmative_word not in low or job.negative_word not in low:
            reasons.append(BAD_ANSWER_WORD)
            details.append(f"{name} lacks the answer-word instruction")
    if not reasons:
        expected = job.affirmative_word if job.boolean_indicator else job.negative_word
        if answer != expected:
            reasons.append(ANSWER_NOT_AT_EXPECTED_LABEL)
            details.append(f"Answer is {answer!r} but the indicator demands {expected!r}")
        if cp_answer == answer:
            reasons.append(CP_NOT_INVERTED)
            details.append("contrapositive answer equals the original answer")
    if reasons:
        return ValidationVerdict(False, tuple(reasons), "; ".join(details), payload)
    return ValidationVerdict(True, (), "", payload)


# ---------------------------------------------------------------------------
# Rewrite loops
# ---------------------------------------------------------------------------

MAX_ATTEMPTS = 5


def _attempt_loop(job: RewriteJob, client: ServiceClient, max_attempts: int,
                  validate) -> tuple[dict, list[ValidationVerdict]]:
    verdicts: list[ValidationVerdict] = []
    for _ in range(max_attempts):
        text = client.complete(SYSTEM_PROMPT, render_prompt(job))
        verdict = validate(text, job)
        verdicts.append(verdict)
        if verdict.ok:
            return verdict.payload, verdicts
    raise ExhaustedAttemptsError(
        f"job {job.job_id}: all {max_attempts} attempts failed validation "
        f"(last: {verdicts[-1].reasons})",
        verdicts=verdicts,
    )


def _pm_record(job: RewriteJob, payload: dict) -> QaRecord:
    return QaRecord(
        qa_id=job.job_id, scene_id=job.saq.scene_id, task=TASK_PM,
        category=CAT_NON_NUMERIC, question=payload["question"],
        answer=job.expected_label, gt_value=None, unit="", cp_link=None,
        variant=VARIANT_PLAIN, provenance=PROVENANCE_LLM, template_id=None,
        referents=(),
    )


def _fv_records(job: RewriteJob, payload: dict) -> tuple[QaRecord, QaRecord]:
    base_id = job.job_id
    cp_id = f"{base_id}-cp"
    original = QaRecord(
        qa_id=base_id, scene_id=job.saq.scene_id, task=TASK_FV,
        category=CAT_NON_NUMERIC, question=payload["question"],
        answer=payload["Answer"].strip().lower(), gt_value=None, unit="",
        cp_link=cp_id, variant=VARIANT_PLAIN, provenance=PROVENANCE_LLM,
        template_id=None, referents=(),
    )
    contrapositive = QaRecord(
        qa_id=cp_id, scene_id=job.saq.scene_id, task=TASK_FV,
        category=CAT_NON_NUMERIC, question=payload["cp_question"],
        answer=payload["cp_answer"].strip().lower(), gt_value=None, unit="",
        cp_link=base_id, variant=VARIANT_PLAIN, provenance=PROVENANCE_LLM,
        template_id=None, referents=(),
    )
    return original, contrapositive


def rewrite_pm(job: RewriteJob, client: ServiceClient,
               max_attempts: int = MAX_ATTEMPTS) -> QaRecord:
    """Rewrite one SAQ into a PM record; raises after ``max_attempts`` failures."""
    payload, _ = _attempt_loop(job, client, max_attempts, validate_pm_response)
    return _pm_record(job, payload)


def rewrite_fv(job: RewriteJob, client: ServiceClient,
               max_attempts: int = MAX_ATTEMPTS) -> tuple[QaRecord, QaRecord]:
    """Rewrite one SAQ into an FV original/contrapositive pair."""
    payload, _ = _attempt_loop(job, client, max_attempts, validate_fv_response)
    return _fv_records(job, payload)


# ---------------------------------------------------------------------------
# Batch track
# ---------------------------------------------------------------------------


def load_saqs(path: str | Path) -> list[SaqItem]:
    items = []
    for pos, row in enumerate(read_jsonl(path)):
        if not isinstance(row.get("question"), str) or not isinstance(row.get("answer"), str):
            raise SchemaViolationError(
                f"{path}: line {pos + 1}: SAQ rows need string 'question' and 'answer'"
            )
        items.append(SaqItem(row["question"], row["answer"], str(row.get("scene_id", ""))))
    return items


def make_pm_jobs(saqs: Sequence[SaqItem], count: int,
                 schedules: Schedules, n_options: int = 5,
                 start_index: int = 0) -> list[RewriteJob]:
    if count > 0 and not saqs:
        raise InsufficientCandidatesError(
            "no SAQ items available for PM rewriting",
            shortfalls={"pm/non-numeric": (count, 0)},
        )
    jobs = []
    for offset in range(count):
        k = start_index + offset
        jobs.append(RewriteJob(
            job_id=f"llm-pm-{k:05d}",
            saq=saqs[k % len(saqs)],
            kind=KIND_PM,
            n_options=n_options,
            expected_label=schedules.pm_letter(k, n_options),
        ))
    return jobs


def make_fv_jobs(saqs: Sequence[SaqItem], count: int,
                 schedules: Schedules, start_index: int = 0) -> list[RewriteJob]:
    if count > 0 and not saqs:
        raise InsufficientCandidatesError(
            "no SAQ items available for FV rewriting",
            shortfalls={"fv/non-numeric": (2 * count, 0)},
        )
    jobs = []
    for offset in range(count):
        k = start_index + offset
        jobs.append(RewriteJob(
            job_id=f"llm-fv-{k:05d}",
            saq=saqs[k % len(saqs)],
            kind=KIND_FV,
            boolean_indicator=schedules.fv_indicator(k),
        ))
    return jobs


@dataclass
class RewriteTrackResult:
    records: list[QaRecord] = field(default_factory=list)
    log_rows: list[dict] = field(default_factory=list)
    failed_jobs: list[str] = field(default_factory=list)


def run_rewrite_track(
    saqs: Sequence[SaqItem],
    pm_count: int,
    fv_count: int,
    client: ServiceClient,
    master_seed: int,
    n_options: int = 5,
    max_attempts: int = MAX_ATTEMPTS,
) -> RewriteTrackResult:
    """Run PM then FV rewrite jobs sequentially, logging attempts per job.

    Jobs that exhaust their attempts are recorded in ``failed_jobs`` rather
    than aborting the batch; the caller decides whether a shortfall is fatal.
    """
    schedules = build_schedules(master_seed)
    result = RewriteTrackResult()
    for job in make_pm_jobs(saqs, pm_count, schedules, n_options=n_options):
        try:
            payload, verdicts = _attempt_loop(job, client, max_attempts,
                                              validate_pm_response)
            result.records.append(_pm_record(job, payload))
            ok = True
        except ExhaustedAttemptsError as exc:
            verdicts = exc.verdicts
            result.failed_jobs.append(job.job_id)
            ok = False
        result.log_rows.append({
            "job_id": job.job_id, "kind": job.kind, "attempts": len(verdicts),
            "ok": ok,
            "reasons": sorted({r for v in verdicts for r in v.reasons}),
        })
    for job in make_fv_jobs(saqs, fv_count, schedules):
        try:
            payload, verdicts = _attempt_loop(job, client, max_attempts,
                                              validate_fv_response)
            result.records.extend(_fv_records(job, payload))
            ok = True
        except ExhaustedAttemptsError as exc:
            verdicts = exc.verdicts
            result.failed_jobs.append(job.job_id)
            ok = False
        result.log_rows.append({
            "job_id": job.job_id, "kind": job.kind, "attempts": len(verdicts),
            "ok": ok,
            "reasons": sorted({r for v in verdicts for r in v.reasons}),
        })
    return result
